// SPDX-License-Identifier: Apache-2.0

#include "mtda/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace mtda {

bool GradCheckReport::passed() const {
  return !too_many_kinks &&
         std::all_of(tensors.begin(), tensors.end(), [](const auto& t) { return t.passed; });
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& t : tensors) worst = std::max(worst, t.finite ? t.max_rel_error : INFINITY);
  return worst;
}

std::size_t GradCheckReport::kinks() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.kinks;
  return n;
}

std::vector<std::string> GradCheckReport::failing() const {
  std::vector<std::string> names;
  for (const auto& t : tensors) {
    if (!t.passed) names.push_back(t.name);
  }
  return names;
}

GradCheckReport grad_check(const std::function<Tensor<double>()>& loss, const NamedTensors& params,
                           const GradCheckOptions& options) {
  for (const auto& [name, p] : params) {
    Tensor<double> handle = p;
    handle.zero_grad();
  }
  {
    Tape<double> tape;
    Tape<double>::Scope scope(tape);
    tape.backward(loss());
  }

  Tape<double>::Pause no_recording;
  GradCheckReport report;
  report.tol = options.tol;
  const double h = options.step;
  const double base = loss().item();
  std::size_t total_entries = 0;
  for (const auto& [name, param] : params) {
    Tensor<double> p = param;
    TensorGradReport row;
    row.name = name;
    row.entries = p.size();
    const std::vector<double> analytic = p.has_grad()
                                             ? std::vector<double>(p.grad().begin(), p.grad().end())
                                             : std::vector<double>(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + h;
      const double up = loss().item();
      p[i] = saved - h;
      const double down = loss().item();
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      if (!std::isfinite(numeric) || !std::isfinite(analytic[i])) {
        row.finite = false;
        row.worst_index = i;
        continue;
      }
      const double abs_err = std::abs(analytic[i] - numeric);
      const double denom =
          std::max({std::abs(analytic[i]), std::abs(numeric), options.magnitude_floor});
      const double rel = abs_err / denom;
      if (options.skip_kinks && rel >= options.tol) {
        const double fwd = (up - base) / h, bwd = (base - down) / h;
        const double match =
            std::min(std::abs(analytic[i] - fwd), std::abs(analytic[i] - bwd)) / denom;
        const double asym = std::abs(fwd - bwd) / denom;
        if (match < options.kink_match_tol && asym > 10.0 * match) {
          ++row.kinks;
          continue;
        }
      }
      row.max_abs_error = std::max(row.max_abs_error, abs_err);
      if (rel > row.max_rel_error) {
        row.max_rel_error = rel;
        row.worst_index = i;
      }
    }
    row.passed = row.finite && row.max_rel_error < options.tol;
    total_entries += row.entries;
    report.tensors.push_back(std::move(row));
  }
  report.too_many_kinks = static_cast<double>(report.kinks()) >
                          options.max_kink_fraction * static_cast<double>(total_entries);
  return report;
}

}  // namespace mtda
