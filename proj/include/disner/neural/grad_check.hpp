#pragma once

// Central finite-difference verification of backward().

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "disner/neural/encoder.hpp"

namespace disner::nn {

struct GradCheckOptions {
  std::size_t sequence_length = 5;
  std::size_t min_coordinates = 200;
  double epsilon = 1e-5;
  // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  // > 0 adds a lookup table with this many rows; input ids index into it.
  std::size_t lookup_rows = 0;
  std::size_t lookup_width = 0;
  uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0;
  std::string worst_parameter;
  std::size_t coordinates = 0;
  std::map<std::string, double> per_group;  // max relative error per parameter
};

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Random parameters (gains and biases perturbed away from their initial
// constants), random inputs and random gold tags in double precision;
// compares backward() against (f(x+e) - f(x-e)) / 2e on a sample of
// coordinates covering every parameter group. Dropout is forced to 0.
inline GradCheckResult grad_check(EncoderConfig cfg, const GradCheckOptions& opt = {}) {
  cfg.dropout = 0.0;
  cfg.seed = opt.seed;
  Params<double> params = init_params<double>(cfg, opt.lookup_rows, opt.lookup_width);
  Rng rng(opt.seed ^ 0x5eedULL);
  Params<double>::visit(
      [&](const std::string& name, Matrix<double>& m) {
        const bool constant_init = name.find(".b") != std::string::npos || name.find("ln") != std::string::npos ||
                                   name == "cls_b";
        if (!constant_init) return;
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += rng.uniform(-0.5, 0.5);
      },
      params);

  const auto t = static_cast<Eigen::Index>(opt.sequence_length);
  SequenceInput<double> input;
  input.features.resize(t, static_cast<Eigen::Index>(cfg.d_model));
  for (Eigen::Index i = 0; i < input.features.size(); ++i) input.features.data()[i] = rng.uniform(-1.0, 1.0);
  if (opt.lookup_rows > 0)
    for (Eigen::Index i = 0; i < t; ++i) input.lookup_ids.push_back(rng.below(opt.lookup_rows));
  std::vector<Tag> gold;
  for (Eigen::Index i = 0; i < t; ++i) gold.push_back(static_cast<Tag>(rng.below(3)));

  const auto st = forward(input, params, cfg);
  const Params<double> grad = backward(st, input, params, cfg, gold);

  std::size_t groups = 0;
  Params<double>::visit([&](const std::string&, const Matrix<double>&) { ++groups; }, params);
  const std::size_t per_group = (opt.min_coordinates + groups - 1) / groups;

  GradCheckResult r;
  Params<double>::visit(
      [&](const std::string& name, Matrix<double>& p, const Matrix<double>& g) {
        const auto n = static_cast<std::size_t>(p.size());
        std::vector<std::size_t> coords(n);
        for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        if (n > per_group) {
          rng.shuffle(coords);
          coords.resize(per_group);
        }
        double worst = 0;
        for (auto idx : coords) {
          double& x = p.data()[idx];
          const double saved = x;
          x = saved + opt.epsilon;
          const double up = loss(input, params, cfg, gold);
          x = saved - opt.epsilon;
          const double down = loss(input, params, cfg, gold);
          x = saved;
          const double numeric = (up - down) / (2 * opt.epsilon);
          worst = std::max(worst, relative_error(g.data()[idx], numeric, opt.floor));
          ++r.coordinates;
        }
        r.per_group[name] = worst;
        if (worst >= r.max_rel_error) {
          r.max_rel_error = worst;
          r.worst_parameter = name;
        }
      },
      params, grad);
  return r;
}

}  // namespace disner::nn
