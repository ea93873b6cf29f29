#include "morphshell/stimulus.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

namespace morphshell {

ShrinkCurve::ShrinkCurve(std::vector<Sample> samples, double glass_transition_kelvin)
    : samples_(std::move(samples)), tg_(glass_transition_kelvin) {
  if (samples_.empty()) {
    throw InputError("shrink curve is empty");
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (!std::isfinite(s.t_ratio) || !std::isfinite(s.length_ratio)) {
      throw InputError("shrink curve sample " + std::to_string(i) + " is not finite");
    }
    if (i > 0 && !(s.t_ratio > samples_[i - 1].t_ratio)) {
      throw InputError("shrink curve T/Tg must be strictly increasing (sample " +
                       std::to_string(i) + ")");
    }
    if (!(s.length_ratio > 0.0) || s.length_ratio > 1.0) {
      throw InputError("shrink curve L/L0 must lie in (0, 1] (sample " + std::to_string(i) + ")");
    }
    if (s.t_ratio <= 1.0 && s.length_ratio != 1.0) {
      throw InputError("shrink curve must have L/L0 = 1 for T/Tg <= 1 (sample " +
                       std::to_string(i) + ")");
    }
  }
}

ShrinkCurve ShrinkCurve::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open shrink curve " + path.string());
  }
  std::vector<Sample> samples;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    std::istringstream ss(hash == std::string::npos ? raw : raw.substr(0, hash));
    double t, l;
    if (!(ss >> t)) {
      continue;
    }
    std::string extra;
    if (!(ss >> l) || (ss >> extra)) {
      throw InputError(path.string() + ":" + std::to_string(lineno) +
                       ": expected two columns (T/Tg, L/L0)");
    }
    samples.push_back({t, l});
  }
  try {
    return ShrinkCurve(std::move(samples));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

double shrink_to_strain(const ShrinkCurve& curve, double t_ratio) {
  const auto& s = curve.samples();
  if (!std::isfinite(t_ratio)) {
    throw InputError("T/Tg must be finite");
  }
  if (t_ratio <= 1.0) {
    return 0.0;
  }
  if (t_ratio >= s.back().t_ratio) {
    return s.back().length_ratio - 1.0;
  }
  // Below the first sample (but above 1) interpolate from (1, 1).
  ShrinkCurve::Sample lo{1.0, 1.0};
  for (const auto& hi : s) {
    if (hi.t_ratio >= t_ratio) {
      if (hi.t_ratio <= lo.t_ratio) {
        return hi.length_ratio - 1.0;
      }
      const double w = (t_ratio - lo.t_ratio) / (hi.t_ratio - lo.t_ratio);
      return (1.0 - w) * lo.length_ratio + w * hi.length_ratio - 1.0;
    }
    if (hi.t_ratio >= 1.0) {
      lo = hi;
    }
  }
  return s.back().length_ratio - 1.0;
}

DistanceField edge_distances(const Mesh& mesh) {
  std::vector<Vec3> mids(static_cast<std::size_t>(mesh.num_edges()));
  std::vector<int> bilayer;
  std::vector<int> single;
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge& edge = mesh.edge(e);
    mids[static_cast<std::size_t>(e)] = 0.5 * (mesh.node(edge.nodes[0]) + mesh.node(edge.nodes[1]));
    (edge.region == Region::Bilayer ? bilayer : single).push_back(e);
  }
  if (bilayer.empty()) {
    throw InputError("thermal field undefined: mesh has no bilayer edges (d_max undefined)");
  }
  if (single.empty()) {
    throw InputError("thermal field undefined: mesh has no single-layer edges (field is identically zero)");
  }

  DistanceField out;
  out.distance.assign(static_cast<std::size_t>(mesh.num_edges()), 0.0);
  for (int i : single) {
    const Vec3& p = mids[static_cast<std::size_t>(i)];
    double best = std::numeric_limits<double>::infinity();
    for (int j : bilayer) {
      best = std::min(best, (p - mids[static_cast<std::size_t>(j)]).squaredNorm());
    }
    const double d = std::sqrt(best);
    out.distance[static_cast<std::size_t>(i)] = d;
    if (d > out.max_distance) {
      out.max_distance = d;
      out.argmax_edge = i;
    }
  }
  if (!(out.max_distance > 0.0)) {
    throw InputError("thermal field undefined: all single-layer midpoints coincide with bilayer midpoints");
  }
  return out;
}

ThermalField ThermalField::zero(int num_edges) {
  ThermalField f;
  f.eps_th.assign(static_cast<std::size_t>(num_edges), 0.0);
  f.distance.assign(static_cast<std::size_t>(num_edges), 0.0);
  return f;
}

ThermalField ThermalField::from_distances(const DistanceField& d, double eps_pre) {
  if (!(eps_pre <= 0.0)) {
    throw InputError("eps_pre must be <= 0 (substrate contracts), got " + std::to_string(eps_pre));
  }
  ThermalField f;
  f.eps_pre = eps_pre;
  f.distance = d.distance;
  f.max_distance = d.max_distance;
  f.eps_th.resize(d.distance.size());
  for (std::size_t i = 0; i < d.distance.size(); ++i) {
    // d_i / d_max is exactly 1 on the farthest edge, so eps_th hits eps_pre.
    f.eps_th[i] = eps_pre * (d.distance[i] / d.max_distance);
  }
  return f;
}

ThermalField ThermalField::rescaled(double new_eps_pre) const {
  if (!(max_distance > 0.0)) {
    if (new_eps_pre != 0.0) {
      throw InputError("cannot rescale a field without distance information");
    }
    return zero(static_cast<int>(eps_th.size()));
  }
  DistanceField d;
  d.distance = distance;
  d.max_distance = max_distance;
  return from_distances(d, new_eps_pre);
}

ThermalField thermal_field(const Mesh& mesh, double eps_pre) {
  if (!(eps_pre <= 0.0)) {
    throw InputError("eps_pre must be <= 0 (substrate contracts), got " + std::to_string(eps_pre));
  }
  return ThermalField::from_distances(edge_distances(mesh), eps_pre);
}

void StimulusSchedule::validate() const {
  if (!(target <= 0.0) || !std::isfinite(target)) {
    throw InputError("schedule target eps_pre must be <= 0, got " + std::to_string(target));
  }
  if (!(initial_step > 0.0) || !(min_step > 0.0) || !(max_step > 0.0)) {
    throw InputError("schedule step sizes must be positive");
  }
  if (min_step > initial_step || initial_step > max_step) {
    throw InputError("schedule steps must satisfy min_step <= initial_step <= max_step");
  }
  if (!(perturbation >= 0.0) || !std::isfinite(perturbation)) {
    throw InputError("schedule perturbation must be >= 0");
  }
}

double StimulusSchedule::perturbation_at(double eps) const {
  if (target == 0.0 || eps <= target) {
    return 0.0;
  }
  switch (decay) {
    case PerturbationDecay::Constant:
      return perturbation;
    case PerturbationDecay::Linear:
      break;
  }
  return perturbation * (1.0 - eps / target);
}

std::vector<LoadStep> plan_steps(const StimulusSchedule& schedule) {
  schedule.validate();
  if (schedule.target == 0.0) {
    return {{0.0, 0.0}};
  }
  const double span = -schedule.target;
  const auto n = static_cast<long>(std::ceil(span / schedule.initial_step - 1e-9));
  std::vector<LoadStep> steps;
  steps.reserve(static_cast<std::size_t>(n));
  for (long k = 1; k <= n; ++k) {
    const double eps = k == n ? schedule.target : -static_cast<double>(k) * schedule.initial_step;
    steps.push_back({eps, schedule.perturbation_at(eps)});
  }
  return steps;
}

}  // namespace morphshell
