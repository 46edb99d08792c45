#ifndef BATHYROM_CONFIG_HPP
#define BATHYROM_CONFIG_HPP

#include <filesystem>
#include <string>

#include "bathyrom/forward.hpp"
#include "bathyrom/inversion.hpp"
#include "bathyrom/prior.hpp"
#include "bathyrom/rom_pca.hpp"
#include "bathyrom/rom_sve.hpp"

namespace bathyrom {

/// Everything a pipeline run needs, with desk-scale defaults. Parsed from
/// a flat `block.key = value` text file; unknown keys are hard errors.
struct RunConfig {
  ChannelGeometry geometry{21, 101, 16.0, 4.0};
  PriorSpec prior;
  ForwardParams forward;
  BcRanges bc;
  std::string rom_kind = "sve";
  SveArchitecture architecture;
  std::vector<int> regressor_widths{32};
  TrainHyper training;
  InversionOptions inversion;
  double observation_noise_std = 0.05;
  int observation_mask_points = 0;  // 0 selects the full grid

  void validate() const;

  [[nodiscard]] PcaHyper pca_hyper() const {
    return PcaHyper{training, regressor_widths};
  }
};

/// Parses the flat key-value format. Lines are `block.key = value`,
/// blank, or `#` comments. Every key must be known; values must parse;
/// the assembled config must validate.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text);

}  // namespace bathyrom

#endif  // BATHYROM_CONFIG_HPP
