#ifndef BATHYROM_MODEL_IO_HPP
#define BATHYROM_MODEL_IO_HPP

#include <filesystem>
#include <memory>

#include "bathyrom/rom_pca.hpp"
#include "bathyrom/rom_sve.hpp"

namespace bathyrom {

void save_model(const SveModel& model, const std::filesystem::path& path);
void save_model(const PcaRomModel& model, const std::filesystem::path& path);

SveModel load_sve_model(const std::filesystem::path& path);
PcaRomModel load_pca_model(const std::filesystem::path& path);

/// "sve" or "pca" from the file's kind tag.
std::string model_kind(const std::filesystem::path& path);

/// Kind-dispatched load behind the shared interface.
std::unique_ptr<Rom> load_model(const std::filesystem::path& path);

}  // namespace bathyrom

#endif  // BATHYROM_MODEL_IO_HPP
