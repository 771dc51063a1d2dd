/*
 * Copyright (c) The corun-affinity Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "corun/error.hpp"

namespace corun {

// ---------------------------------------------------------------------------
// Basic sample statistics
// ---------------------------------------------------------------------------

inline double mean(std::span<const double> xs) {
  if (xs.empty()) raise(Errc::EmptyInput, "mean");
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

/// Sample (n-1) standard deviation.
inline double sample_stddev(std::span<const double> xs) {
  if (xs.size() < 2) raise(Errc::InsufficientSamples, "stddev", "need at least 2 samples");
  const double m = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

namespace detail {

// Two-sided Student-t critical values for df 1..30. Beyond df 30 the normal
// quantile is used. Levels other than these three are rejected.
inline constexpr double kT90[30] = {
    6.3138, 2.9200, 2.3534, 2.1318, 2.0150, 1.9432, 1.8946, 1.8595, 1.8331, 1.8125,
    1.7959, 1.7823, 1.7709, 1.7613, 1.7531, 1.7459, 1.7396, 1.7341, 1.7291, 1.7247,
    1.7207, 1.7171, 1.7139, 1.7109, 1.7081, 1.7056, 1.7033, 1.7011, 1.6991, 1.6973};
inline constexpr double kT95[30] = {
    12.7062, 4.3027, 3.1824, 2.7764, 2.5706, 2.4469, 2.3646, 2.3060, 2.2622, 2.2281,
    2.2010,  2.1788, 2.1604, 2.1448, 2.1314, 2.1199, 2.1098, 2.1009, 2.0930, 2.0860,
    2.0796,  2.0739, 2.0687, 2.0639, 2.0595, 2.0555, 2.0518, 2.0484, 2.0452, 2.0423};
inline constexpr double kT99[30] = {
    63.6567, 9.9248, 5.8409, 4.6041, 4.0321, 3.7074, 3.4995, 3.3554, 3.2498, 3.1693,
    3.1058,  3.0545, 3.0123, 2.9768, 2.9467, 2.9208, 2.8982, 2.8784, 2.8609, 2.8453,
    2.8314,  2.8188, 2.8073, 2.7969, 2.7874, 2.7787, 2.7707, 2.7633, 2.7564, 2.7500};
inline constexpr double kZ90 = 1.6449;
inline constexpr double kZ95 = 1.9600;
inline constexpr double kZ99 = 2.5758;

}  // namespace detail

/// Two-sided critical value t such that P(|T_df| <= t) = level.
/// Supported levels: 0.90, 0.95, 0.99.
inline double student_t_critical(double level, std::size_t df) {
  const double* table = nullptr;
  double z = 0.0;
  if (std::abs(level - 0.90) < 1e-9) {
    table = detail::kT90;
    z = detail::kZ90;
  } else if (std::abs(level - 0.95) < 1e-9) {
    table = detail::kT95;
    z = detail::kZ95;
  } else if (std::abs(level - 0.99) < 1e-9) {
    table = detail::kT99;
    z = detail::kZ99;
  } else {
    raise(Errc::UnsupportedLevel, std::to_string(level), "supported levels: 0.90, 0.95, 0.99");
  }
  if (df == 0) raise(Errc::InsufficientSamples, "t critical value", "df must be >= 1");
  return df <= 30 ? table[df - 1] : z;
}

/// Student-t confidence interval: mean +- t(level, n-1) * stddev / sqrt(n).
inline Interval confidence_interval(std::span<const double> samples, double level = 0.95) {
  if (samples.size() < 2) {
    raise(Errc::InsufficientSamples, "confidence_interval", "need at least 2 samples");
  }
  const double m = mean(samples);
  const double sd = sample_stddev(samples);
  const double t = student_t_critical(level, samples.size() - 1);
  const double half = t * sd / std::sqrt(static_cast<double>(samples.size()));
  return {m - half, m + half};
}

// ---------------------------------------------------------------------------
// Performance loss and the two affinity criteria
// ---------------------------------------------------------------------------

/// Relative slowdown in percentage points: 100 * (corun - baseline) / baseline.
/// Negative values are speedups; the value can never go below -100 because
/// durations are positive.
struct LossPercent {
  double value = 0.0;
  friend bool operator==(const LossPercent&, const LossPercent&) = default;
};

inline LossPercent loss_percent(double baseline_mean_s, double corun_mean_s) {
  if (!(baseline_mean_s > 0.0)) {
    raise(Errc::NonPositiveDuration, "baseline mean", std::to_string(baseline_mean_s));
  }
  if (!(corun_mean_s > 0.0)) {
    raise(Errc::NonPositiveDuration, "co-run mean", std::to_string(corun_mean_s));
  }
  return {100.0 * (corun_mean_s - baseline_mean_s) / baseline_mean_s};
}

/// The two criteria for an ordered pair. `average` is the quantitative
/// criterion (mean of both sides' losses); `distance` is the qualitative one
/// (absolute gap between the sides — smaller means a more stable pairing).
/// Both keep full precision; rounding happens only at display time.
struct PairMetrics {
  LossPercent loss_first;
  LossPercent loss_second;
  double average = 0.0;
  double distance = 0.0;
  friend bool operator==(const PairMetrics&, const PairMetrics&) = default;
};

inline PairMetrics pair_metrics(LossPercent loss_first, LossPercent loss_second) {
  PairMetrics m;
  m.loss_first = loss_first;
  m.loss_second = loss_second;
  m.average = (loss_first.value + loss_second.value) / 2.0;
  m.distance = std::abs(loss_first.value - loss_second.value);
  return m;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

enum class AffinityClass { Coexist, Conditional, Avoid };

inline std::string to_label(AffinityClass c) {
  switch (c) {
    case AffinityClass::Coexist: return "coexist";
    case AffinityClass::Conditional: return "conditional";
    case AffinityClass::Avoid: return "avoid";
  }
  return "conditional";
}

inline AffinityClass parse_affinity_class(std::string_view s) {
  if (s == "coexist") return AffinityClass::Coexist;
  if (s == "conditional") return AffinityClass::Conditional;
  if (s == "avoid") return AffinityClass::Avoid;
  raise(Errc::ParseError, "affinity class", std::string(s));
}

/// Cut points, in percentage points, between the three classes. Defaults are
/// calibrated so known good pairs (average <= ~11) land in Coexist and pairs
/// with catastrophic one-sided losses (>= ~166 both sides) land in Avoid.
struct ClassificationThresholds {
  double coexist_max_avg = 25.0;
  double coexist_max_distance = 25.0;
  double avoid_min_avg = 150.0;

  void validate() const {
    if (!(coexist_max_avg >= 0.0) || !(coexist_max_avg < avoid_min_avg) ||
        !(coexist_max_distance >= 0.0)) {
      raise(Errc::InvalidThresholds, "classification thresholds",
            "require 0 <= coexist_max_avg < avoid_min_avg and coexist_max_distance >= 0");
    }
  }

  friend bool operator==(const ClassificationThresholds&, const ClassificationThresholds&) = default;
};

/// Coexist iff both criteria are small; Avoid iff the average alone is
/// disqualifying; Conditional otherwise. A negative average (net speedup)
/// counts as zero.
inline AffinityClass classify(const PairMetrics& m, const ClassificationThresholds& t) {
  t.validate();
  const double avg = std::max(0.0, m.average);
  if (avg <= t.coexist_max_avg && m.distance <= t.coexist_max_distance) {
    return AffinityClass::Coexist;
  }
  if (avg >= t.avoid_min_avg) return AffinityClass::Avoid;
  return AffinityClass::Conditional;
}

// ---------------------------------------------------------------------------
// 0..scale_max normalization
// ---------------------------------------------------------------------------

/// Min-max map onto [0, scale_max] (default 0..9, the report scale). An
/// all-equal input has no spread to express and maps to all zeros.
inline std::vector<double> normalize_scores(std::span<const double> values, double scale_max = 9.0) {
  if (values.empty()) raise(Errc::EmptyInput, "normalize_scores");
  if (!(scale_max > 0.0)) {
    raise(Errc::InvalidThresholds, "normalize_scores", "scale_max must be > 0");
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out;
  out.reserve(values.size());
  if (hi == lo) {
    out.assign(values.size(), 0.0);
    return out;
  }
  for (double v : values) out.push_back((v - lo) / (hi - lo) * scale_max);
  return out;
}

}  // namespace corun
