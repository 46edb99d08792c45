#include "bathyrom/rom.hpp"

namespace bathyrom {

Eigen::VectorXd predict_observations(const Rom& model, const Eigen::VectorXd& z,
                                     const BoundaryConditions& bc,
                                     const ObservationMask& mask) {
  const Rom::Decoded d = model.decode(z, bc);
  FlowField flow;
  flow.geometry = model.geometry();
  flow.u = d.u;
  flow.v = d.v;
  return apply_mask(flow, mask);
}

}  // namespace bathyrom
