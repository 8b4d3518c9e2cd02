#pragma once

/// C ABI for user map plugins loaded with dlopen.  A plugin exposes
///   extern "C" const PitchforkPluginV1* pitchfork_plugin_v1();
/// returning a static descriptor.  `inverse` and `jacobian` may be null;
/// the toolkit then falls back to damped Newton and finite differences.

extern "C" {

struct PitchforkPluginV1 {
  int abi_version;  // = 1
  int ambient_dim;  // 2 or 3 (unit circle / unit sphere invariant)
  double mu_abs_max;
  void (*forward)(const double* x, int m, double mu, double* out);
  void (*inverse)(const double* x, int m, double mu, double* out);
  void (*jacobian)(const double* x, int m, double mu, double* jac_row_major);
};

using pitchfork_plugin_entry_fn = const PitchforkPluginV1* (*)();

}  // extern "C"
