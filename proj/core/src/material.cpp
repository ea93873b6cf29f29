#include "morphshell/material.hpp"

#include <cmath>
#include <string>

namespace morphshell {

namespace {

const double kSqrt3 = std::sqrt(3.0);

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InputError(std::string(what) + " must be positive and finite (got " +
                     std::to_string(v) + ")");
  }
}

void check_layer(const LayerSpec& layer, const std::string& name) {
  require_positive(layer.young_modulus, (name + ".young_modulus").c_str());
  require_positive(layer.thickness, (name + ".thickness").c_str());
}

}  // namespace

Stiffness layer_stiffness(const LayerSpec& layer, double l0) {
  check_layer(layer, "layer");
  require_positive(l0, "l0");
  const double Y = layer.young_modulus, h = layer.thickness;
  return {0.5 * kSqrt3 * Y * h * l0 * l0, (2.0 / kSqrt3) * Y * h * h * h / 12.0};
}

BilayerSection bilayer_section(const LayerSpec& layer1, const LayerSpec& layer2, double l0) {
  check_layer(layer1, "layer1");
  check_layer(layer2, "layer2");
  require_positive(l0, "l0");
  const double Y1 = layer1.young_modulus, h1 = layer1.thickness;
  const double Y2 = layer2.young_modulus, h2 = layer2.thickness;
  const double y1 = 0.5 * h1;
  const double y2 = h1 + 0.5 * h2;
  // Section areas per unit width.
  const double ybar = (Y1 * h1 * y1 + Y2 * h2 * y2) / (Y1 * h1 + Y2 * h2);
  const double d1 = y1 - ybar, d2 = y2 - ybar;
  const double rigidity = Y1 * (h1 * h1 * h1 / 12.0 + h1 * d1 * d1) +
                          Y2 * (h2 * h2 * h2 / 12.0 + h2 * d2 * d2);

  BilayerSection out;
  out.neutral_axis = ybar;
  out.rigidity_per_width = rigidity;
  out.stiffness.stretch = layer_stiffness(layer1, l0).stretch + layer_stiffness(layer2, l0).stretch;
  out.stiffness.bend = (2.0 / kSqrt3) * rigidity;
  return out;
}

MaterialModel assemble_material(const MaterialConfig& config) {
  if (!config.layer1) {
    throw InputError("material: missing field 'layer1'");
  }
  if (!config.layer2) {
    throw InputError("material: missing field 'layer2'");
  }
  if (!config.l0) {
    throw InputError("material: missing field 'l0'");
  }
  check_layer(*config.layer1, "material.layer1");
  check_layer(*config.layer2, "material.layer2");
  require_positive(*config.l0, "material.l0");
  require_positive(config.stretch_scale, "material.stretch_scale");

  MaterialModel m;
  m.stretch_scale = config.stretch_scale;
  m.single = layer_stiffness(*config.layer1, *config.l0);
  m.bilayer = bilayer_stiffness(*config.layer1, *config.layer2, *config.l0);
  m.single.stretch *= config.stretch_scale;
  m.bilayer.stretch *= config.stretch_scale;
  return m;
}

}  // namespace morphshell
