#pragma once

#include "morphshell/common.hpp"

#include <optional>

namespace morphshell {

struct LayerSpec {
  double young_modulus = 0.0;  // MPa
  double thickness = 0.0;      // mm
};

/// Per-edge stretching stiffness (N) and per-hinge bending stiffness (N mm).
struct Stiffness {
  double stretch = 0.0;
  double bend = 0.0;
};

/// Bilayer stiffness together with the section properties it came from.
struct BilayerSection {
  Stiffness stiffness;
  double neutral_axis = 0.0;      // mm, measured from the bottom of layer 1
  double rigidity_per_width = 0.0;  // D_eff / b, MPa mm^3
};

/// k_s = (sqrt(3)/2) Y h l0^2,  k_b = (2/sqrt(3)) Y h^3 / 12.
Stiffness layer_stiffness(const LayerSpec& layer, double l0);

/// Composite of layer 1 (bottom) and layer 2 bonded on top. Stretching
/// stiffnesses add; bending uses the parallel-axis rigidity about the
/// modulus-weighted neutral axis.
BilayerSection bilayer_section(const LayerSpec& layer1, const LayerSpec& layer2, double l0);

inline Stiffness bilayer_stiffness(const LayerSpec& layer1, const LayerSpec& layer2, double l0) {
  return bilayer_section(layer1, layer2, l0).stiffness;
}

struct MaterialModel {
  Stiffness single;
  Stiffness bilayer;
  double stretch_scale = 10.0;

  const Stiffness& operator[](Region r) const {
    return r == Region::Bilayer ? bilayer : single;
  }
};

struct MaterialConfig {
  std::optional<LayerSpec> layer1;  // responsive substrate
  std::optional<LayerSpec> layer2;  // inert patterned layer
  std::optional<double> l0;         // mm, normally the mesh mean edge length
  double stretch_scale = 10.0;
};

/// Throws InputError naming the first missing or invalid field.
MaterialModel assemble_material(const MaterialConfig& config);

}  // namespace morphshell
