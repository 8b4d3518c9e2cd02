// Test plugin: cubic normal-form map on the unit circle, rotated by 0.3.
// Radially r -> (1 + mu) r - r^3, so the bifurcated branches sit at the
// same +-sqrt(mu) offsets as the built-in canonical family.  No inverse or
// Jacobian is exported: the host falls back to damped Newton and central
// differences.

#include <cmath>

#include "pitchfork/plugin.hpp"

namespace {

constexpr double kAngle = 0.3;

void forward(const double* x, int m, double mu, double* out) {
  (void)m;
  const double rho = std::sqrt(x[0] * x[0] + x[1] * x[1]);
  const double r = rho - 1.0;
  const double image_rho = 1.0 + (1.0 + mu) * r - r * r * r;
  const double c = std::cos(kAngle), s = std::sin(kAngle);
  const double scale = image_rho / rho;
  out[0] = scale * (c * x[0] - s * x[1]);
  out[1] = scale * (s * x[0] + c * x[1]);
}

const PitchforkPluginV1 kDescriptor = {
    /*abi_version=*/1,
    /*ambient_dim=*/2,
    /*mu_abs_max=*/0.04,
    /*forward=*/forward,
    /*inverse=*/nullptr,
    /*jacobian=*/nullptr,
};

}  // namespace

extern "C" const PitchforkPluginV1* pitchfork_plugin_v1() {
  return &kDescriptor;
}
