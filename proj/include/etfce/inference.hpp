#pragma once

// Nonparametric max-statistic inference.
//
// Randomization b = 0 is always the observed data. For b = 1..n_perm the data
// are sign-flipped per subject (one-sample designs) or group labels are
// shuffled (two-sample designs); every randomization builds one merge forest
// per tail and derives all requested statistics from it. FWE p-values are
//
//   p = (#{b >= 1 : max_b >= observed} + 1) / (n_perm + 1).

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "etfce/enhance.hpp"
#include "etfce/forest.hpp"
#include "etfce/volume.hpp"

namespace etfce {

/// |t| substituted for zero-variance voxels with a nonzero mean.
inline constexpr double kTCap = 1e6;

/// One row per subject, one column per in-mask voxel.
class SubjectData {
 public:
  SubjectData(std::shared_ptr<const Mask> mask, int n_subjects, std::vector<double> matrix)
      : mask_(std::move(mask)), n_subjects_(n_subjects), matrix_(std::move(matrix)) {
    if (!mask_) throw StructuralError("subject data requires a mask");
    if (n_subjects_ < 2) throw StructuralError("at least two subjects are required");
    if (matrix_.size() != static_cast<std::size_t>(n_subjects_) * mask_->in_mask_count())
      throw StructuralError("subject matrix size does not match n_subjects x in-mask voxels");
    for (std::size_t i = 0; i < matrix_.size(); ++i)
      if (!std::isfinite(matrix_[i]))
        throw StructuralError("non-finite subject value (subject " +
                              std::to_string(i / mask_->in_mask_count()) + ", voxel " +
                              std::to_string(i % mask_->in_mask_count()) + ")");
  }

  const std::shared_ptr<const Mask>& mask_ptr() const { return mask_; }
  const Mask& mask() const { return *mask_; }
  int n_subjects() const { return n_subjects_; }
  std::size_t n_voxels() const { return mask_->in_mask_count(); }
  std::span<const double> row(int subject) const {
    return {matrix_.data() + static_cast<std::size_t>(subject) * n_voxels(), n_voxels()};
  }

 private:
  std::shared_ptr<const Mask> mask_;
  int n_subjects_;
  std::vector<double> matrix_;
};

namespace detail {

inline double guarded_t(double numerator, double se) {
  if (se > 0.0) return numerator / se;
  if (numerator > 0.0) return kTCap;
  if (numerator < 0.0) return -kTCap;
  return 0.0;
}

}  // namespace detail

/// One-sample t of sign-flipped data; `mean` is scratch of n_voxels.
inline void one_sample_t_into(const SubjectData& data, std::span<const std::int8_t> signs,
                              std::vector<double>& out, std::vector<double>& mean) {
  const int n = data.n_subjects();
  if (static_cast<int>(signs.size()) != n) throw StructuralError("one sign per subject is required");
  const std::size_t v = data.n_voxels();
  mean.assign(v, 0.0);
  out.assign(v, 0.0);
  for (int j = 0; j < n; ++j) {
    const auto row = data.row(j);
    const double s = signs[j];
    for (std::size_t i = 0; i < v; ++i) mean[i] += s * row[i];
  }
  for (auto& m : mean) m /= n;
  for (int j = 0; j < n; ++j) {
    const auto row = data.row(j);
    const double s = signs[j];
    for (std::size_t i = 0; i < v; ++i) {
      const double d = s * row[i] - mean[i];
      out[i] += d * d;
    }
  }
  const double root_n = std::sqrt(static_cast<double>(n));
  for (std::size_t i = 0; i < v; ++i) {
    const double sd = std::sqrt(out[i] / (n - 1));
    out[i] = detail::guarded_t(mean[i], sd / root_n);
  }
}

inline StatisticMap one_sample_t(const SubjectData& data, std::span<const std::int8_t> signs) {
  std::vector<double> out, scratch;
  one_sample_t_into(data, signs, out, scratch);
  return StatisticMap(data.mask_ptr(), std::move(out));
}

/// Pooled-variance two-sample t, group labelled 1 minus group labelled 0.
inline void two_sample_t_into(const SubjectData& data, std::span<const std::uint8_t> labels,
                              std::vector<double>& out, std::vector<double>& scratch) {
  const int n = data.n_subjects();
  if (static_cast<int>(labels.size()) != n) throw StructuralError("one label per subject is required");
  int n1 = 0;
  for (auto l : labels) n1 += l ? 1 : 0;
  const int n0 = n - n1;
  if (n1 == 0 || n0 == 0) throw StructuralError("both groups must be nonempty");
  const std::size_t v = data.n_voxels();
  scratch.assign(2 * v, 0.0);
  double* mean1 = scratch.data();
  double* mean0 = scratch.data() + v;
  for (int j = 0; j < n; ++j) {
    const auto row = data.row(j);
    double* m = labels[j] ? mean1 : mean0;
    for (std::size_t i = 0; i < v; ++i) m[i] += row[i];
  }
  for (std::size_t i = 0; i < v; ++i) {
    mean1[i] /= n1;
    mean0[i] /= n0;
  }
  out.assign(v, 0.0);
  for (int j = 0; j < n; ++j) {
    const auto row = data.row(j);
    const double* m = labels[j] ? mean1 : mean0;
    for (std::size_t i = 0; i < v; ++i) {
      const double d = row[i] - m[i];
      out[i] += d * d;
    }
  }
  const int df = n - 2;
  const double inv = 1.0 / n1 + 1.0 / n0;
  for (std::size_t i = 0; i < v; ++i) {
    const double pooled = df > 0 ? out[i] / df : 0.0;
    out[i] = detail::guarded_t(mean1[i] - mean0[i], std::sqrt(pooled * inv));
  }
}

inline StatisticMap two_sample_t(const SubjectData& data, std::span<const std::uint8_t> labels) {
  std::vector<double> out, scratch;
  two_sample_t_into(data, labels, out, scratch);
  return StatisticMap(data.mask_ptr(), std::move(out));
}

enum class RandomizationKind { sign_flip, two_sample_permutation };

struct RandomizationPlan {
  RandomizationKind kind = RandomizationKind::sign_flip;
  /// Number of non-identity randomizations. Ignored when exhaustive or when
  /// explicit sign patterns are supplied.
  std::int64_t n_perm = 5000;
  std::uint64_t seed = 0;
  /// Per-subject group membership (1 = first group); two-sample designs only.
  std::vector<std::uint8_t> group_labels;
  bool exhaustive = false;
  /// Explicit sign-flip rows; row 0 must be the identity.
  std::vector<std::vector<std::int8_t>> sign_patterns;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Resolves a plan for a given subject count and hands out the pattern of
/// any randomization index independently of all others.
class Randomizer {
 public:
  static constexpr int kMaxExhaustiveSubjects = 24;

  Randomizer(const RandomizationPlan& plan, int n_subjects) : plan_(plan), n_(n_subjects) {
    if (n_ < 2) throw StructuralError("at least two subjects are required");
    if (plan_.kind == RandomizationKind::sign_flip) {
      if (!plan_.sign_patterns.empty()) {
        for (std::size_t r = 0; r < plan_.sign_patterns.size(); ++r) {
          const auto& row = plan_.sign_patterns[r];
          if (static_cast<int>(row.size()) != n_)
            throw StructuralError("sign pattern row " + std::to_string(r + 1) + " has " +
                                  std::to_string(row.size()) + " entries for " +
                                  std::to_string(n_) + " subjects");
          for (auto s : row)
            if (s != 1 && s != -1)
              throw StructuralError("sign pattern row " + std::to_string(r + 1) + " has a non-+-1 entry");
        }
        const auto& first = plan_.sign_patterns.front();
        if (!std::all_of(first.begin(), first.end(), [](std::int8_t s) { return s == 1; }))
          throw StructuralError("the first sign pattern must be the identity");
        n_perm_ = static_cast<std::int64_t>(plan_.sign_patterns.size()) - 1;
      } else if (plan_.exhaustive) {
        if (n_ > kMaxExhaustiveSubjects)
          throw BudgetError("exhaustive sign flipping is limited to " +
                            std::to_string(kMaxExhaustiveSubjects) + " subjects");
        n_perm_ = (std::int64_t{1} << n_) - 1;
      } else {
        n_perm_ = plan_.n_perm;
      }
    } else {
      if (static_cast<int>(plan_.group_labels.size()) != n_)
        throw StructuralError("two-sample designs need one group label per subject");
      int n1 = 0;
      for (auto& l : plan_.group_labels) {
        l = l ? 1 : 0;
        n1 += l;
      }
      if (n1 == 0 || n1 == n_) throw StructuralError("both groups must be nonempty");
      if (plan_.exhaustive) {
        if (n_ > kMaxExhaustiveSubjects)
          throw BudgetError("exhaustive label permutation is limited to " +
                            std::to_string(kMaxExhaustiveSubjects) + " subjects");
        std::uint64_t identity = 0;
        for (int j = 0; j < n_; ++j)
          if (plan_.group_labels[j]) identity |= std::uint64_t{1} << j;
        // Gosper's hack: all n-bit words with n1 bits set, ascending.
        std::uint64_t w = (std::uint64_t{1} << n1) - 1;
        const std::uint64_t limit = std::uint64_t{1} << n_;
        while (w < limit) {
          if (w != identity) arrangements_.push_back(w);
          const std::uint64_t c = w & (~w + 1);
          const std::uint64_t r = w + c;
          w = (((r ^ w) >> 2) / c) | r;
        }
        n_perm_ = static_cast<std::int64_t>(arrangements_.size());
      } else {
        n_perm_ = plan_.n_perm;
      }
    }
    if (n_perm_ < 1) throw StructuralError("at least one non-identity randomization is required");
  }

  RandomizationKind kind() const { return plan_.kind; }
  int n_subjects() const { return n_; }
  std::int64_t n_perm() const { return n_perm_; }
  const RandomizationPlan& plan() const { return plan_; }

  void signs(std::int64_t b, std::span<std::int8_t> out) const {
    if (b == 0) {
      std::fill(out.begin(), out.end(), std::int8_t{1});
    } else if (!plan_.sign_patterns.empty()) {
      std::copy(plan_.sign_patterns[b].begin(), plan_.sign_patterns[b].end(), out.begin());
    } else if (plan_.exhaustive) {
      for (int j = 0; j < n_; ++j) out[j] = (b >> j) & 1 ? -1 : 1;
    } else {
      std::mt19937_64 rng(stream_seed(b));
      for (int j = 0; j < n_; ++j) out[j] = (rng() >> 63) ? -1 : 1;
    }
  }

  void labels(std::int64_t b, std::span<std::uint8_t> out) const {
    if (b == 0) {
      std::copy(plan_.group_labels.begin(), plan_.group_labels.end(), out.begin());
    } else if (plan_.exhaustive) {
      const std::uint64_t w = arrangements_[b - 1];
      for (int j = 0; j < n_; ++j) out[j] = (w >> j) & 1;
    } else {
      std::copy(plan_.group_labels.begin(), plan_.group_labels.end(), out.begin());
      std::mt19937_64 rng(stream_seed(b));
      for (int j = n_ - 1; j > 0; --j) std::swap(out[j], out[bounded(rng, j + 1)]);
    }
  }

 private:
  std::uint64_t stream_seed(std::int64_t b) const {
    return splitmix64(plan_.seed ^ splitmix64(static_cast<std::uint64_t>(b)));
  }

  // Unbiased draw in [0, bound).
  static int bounded(std::mt19937_64& rng, int bound) {
    const std::uint64_t range = static_cast<std::uint64_t>(bound);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % range;
    std::uint64_t x;
    do x = rng();
    while (x >= limit);
    return static_cast<int>(x % range);
  }

  RandomizationPlan plan_;
  int n_;
  std::int64_t n_perm_ = 0;
  std::vector<std::uint64_t> arrangements_;
};

/// Statistic map of randomization b, in the scratch-free form used by tests.
inline StatisticMap randomized_statistic(const SubjectData& data, const Randomizer& randomizer,
                                         std::int64_t b) {
  if (randomizer.kind() == RandomizationKind::sign_flip) {
    std::vector<std::int8_t> s(data.n_subjects());
    randomizer.signs(b, s);
    return one_sample_t(data, s);
  }
  std::vector<std::uint8_t> l(data.n_subjects());
  randomizer.labels(b, l);
  return two_sample_t(data, l);
}

enum class Tail { positive, negative, two_sided };

inline std::string to_string(Tail t) {
  switch (t) {
    case Tail::positive: return "positive";
    case Tail::negative: return "negative";
    case Tail::two_sided: return "two-sided";
  }
  return "?";
}

enum class StatisticKind { tfce, cluster_extent, cluster_mass };

inline std::string to_string(StatisticKind k) {
  switch (k) {
    case StatisticKind::tfce: return "tfce";
    case StatisticKind::cluster_extent: return "cluster_extent";
    case StatisticKind::cluster_mass: return "cluster_mass";
  }
  return "?";
}

struct StatisticRequest {
  bool tfce = true;
  std::optional<double> extent_cdt;
  std::optional<double> mass_cdt;
  MassConvention mass_convention = MassConvention::raw;
};

struct InferenceOptions {
  Connectivity conn = Connectivity::k3D26;
  EnhanceParams params;
  RandomizationPlan plan;
  StatisticRequest requested;
  Tail tails = Tail::positive;
  int workers = 1;
  /// Replaces exact TFCE with the uniform-threshold approximation.
  std::optional<DiscretizationScheme> discretization;
};

struct PValueMap {
  std::shared_ptr<const Mask> mask;
  std::vector<double> p;
};

struct NullDistribution {
  std::vector<double> maxima;  // b = 1..n_perm
  double identity_max = 0.0;   // b = 0
  EnhancedMap observed;
};

/// Results for one tail (positive, or negative evaluated on the negated map).
struct TailResult {
  Tail tail = Tail::positive;
  NullDistribution null;
  PValueMap p;
  ClusterTable clusters;  // cluster statistics only
  std::vector<double> cluster_statistic;
  std::vector<double> cluster_p;
};

struct StatisticResult {
  StatisticKind kind = StatisticKind::tfce;
  std::optional<double> cdt;
  std::vector<TailResult> tails;
  PValueMap p;  // tails combined when two-sided
};

struct StageTimes {
  double statistic = 0.0;
  double forest = 0.0;
  double tfce = 0.0;
  double cluster = 0.0;
  double total() const { return statistic + forest + tfce + cluster; }
  StageTimes& operator+=(const StageTimes& o) {
    statistic += o.statistic;
    forest += o.forest;
    tfce += o.tfce;
    cluster += o.cluster;
    return *this;
  }
};

struct InferenceResult {
  std::shared_ptr<const StatisticMap> observed_statistic;
  std::int64_t n_perm = 0;
  std::vector<StatisticResult> statistics;
  std::vector<std::string> warnings;
  StageTimes times;  // summed over all randomizations and workers

  const StatisticResult* find(StatisticKind k) const {
    for (const auto& s : statistics)
      if (s.kind == k) return &s;
    return nullptr;
  }
};

/// FWE p-value of `observed` against maxima sorted ascending.
inline double fwe_p(const std::vector<double>& sorted_maxima, double observed) {
  const auto at_least = static_cast<std::int64_t>(
      sorted_maxima.end() - std::lower_bound(sorted_maxima.begin(), sorted_maxima.end(), observed));
  return static_cast<double>(at_least + 1) / static_cast<double>(sorted_maxima.size() + 1);
}

namespace detail {

struct StatSlot {
  StatisticKind kind;
  std::optional<double> cdt;
};

struct InferenceContext {
  const SubjectData& data;
  const Adjacency& adjacency;
  const Randomizer& randomizer;
  const InferenceOptions& options;
  std::vector<StatSlot> slots;
  std::vector<Tail> tails;
};

struct Scratch {
  std::vector<std::int8_t> signs;
  std::vector<std::uint8_t> labels;
  std::vector<double> stat, stat_aux, tail_values, by_rank;
  std::vector<Rank> label;
  ForestBuilder builder;
  MergeForest forest;
  ClusterSummary summary;
  StageTimes times;
};

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point& t) {
  const auto now = Clock::now();
  const double s = std::chrono::duration<double>(now - t).count();
  t = now;
  return s;
}

inline void compute_statistic(const InferenceContext& ctx, std::int64_t b, Scratch& s) {
  const int n = ctx.data.n_subjects();
  if (ctx.randomizer.kind() == RandomizationKind::sign_flip) {
    s.signs.resize(n);
    ctx.randomizer.signs(b, s.signs);
    one_sample_t_into(ctx.data, s.signs, s.stat, s.stat_aux);
  } else {
    s.labels.resize(n);
    ctx.randomizer.labels(b, s.labels);
    two_sample_t_into(ctx.data, s.labels, s.stat, s.stat_aux);
  }
}

// Builds the forest of one tail and writes each statistic's maximum into
// maxima_per_slot. Per-rank TFCE scores are left in s.by_rank.
inline void evaluate_tail(const InferenceContext& ctx, Tail tail, Scratch& s,
                          std::span<double> maxima_per_slot) {
  auto t = Clock::now();
  s.tail_values.resize(s.stat.size());
  double h_max = 0.0;
  for (std::size_t i = 0; i < s.stat.size(); ++i) {
    s.tail_values[i] = tail == Tail::negative ? -s.stat[i] : s.stat[i];
    h_max = std::max(h_max, s.tail_values[i]);
  }
  s.builder.build(rank_order(s.tail_values, ctx.options.params.h0), ctx.adjacency, s.forest);
  s.times.forest += seconds_since(t);

  for (std::size_t k = 0; k < ctx.slots.size(); ++k) {
    const auto& slot = ctx.slots[k];
    if (slot.kind == StatisticKind::tfce) {
      const auto& p = ctx.options.params;
      if (ctx.options.discretization)
        discretized_by_rank(s.forest, h_max, p, *ctx.options.discretization, s.by_rank, s.label);
      else
        generalized_by_rank(s.forest, GeneralizedStatistic::tfce(p.E, p.H), s.by_rank);
      double m = 0.0;
      for (double x : s.by_rank) m = std::max(m, x);
      maxima_per_slot[k] = m;
      s.times.tfce += seconds_since(t);
    } else {
      summarize_clusters(s.forest, *slot.cdt, ctx.options.requested.mass_convention, s.summary);
      maxima_per_slot[k] = slot.kind == StatisticKind::cluster_extent
                               ? static_cast<double>(s.summary.max_extent)
                               : s.summary.max_mass;
      s.times.cluster += seconds_since(t);
    }
  }
}

}  // namespace detail

inline InferenceResult run_inference(const SubjectData& data, const InferenceOptions& options) {
  options.params.validate();
  if (options.discretization && options.discretization->n < 1)
    throw StructuralError("discretization needs at least one threshold");
  const Adjacency adjacency(data.mask(), options.conn);
  const Randomizer randomizer(options.plan, data.n_subjects());

  detail::InferenceContext ctx{data, adjacency, randomizer, options, {}, {}};
  const auto& req = options.requested;
  if (req.tfce) ctx.slots.push_back({StatisticKind::tfce, std::nullopt});
  if (req.extent_cdt) ctx.slots.push_back({StatisticKind::cluster_extent, req.extent_cdt});
  if (req.mass_cdt) ctx.slots.push_back({StatisticKind::cluster_mass, req.mass_cdt});
  if (ctx.slots.empty()) throw StructuralError("no statistics requested");
  for (const auto& slot : ctx.slots)
    if (slot.cdt && !(*slot.cdt > 0.0 && *slot.cdt > options.params.h0))
      throw StructuralError("cluster-defining threshold must be > 0 and > h0");
  if (options.tails != Tail::negative) ctx.tails.push_back(Tail::positive);
  if (options.tails != Tail::positive) ctx.tails.push_back(Tail::negative);

  const std::int64_t n_perm = randomizer.n_perm();
  const std::size_t n_slots = ctx.slots.size();
  const std::size_t n_tails = ctx.tails.size();
  const std::size_t stride = n_slots * n_tails;
  // maxima[b * stride + tail * n_slots + slot]
  std::vector<double> maxima(static_cast<std::size_t>(n_perm + 1) * stride, 0.0);

  InferenceResult result;
  result.n_perm = n_perm;

  // Observed data.
  detail::Scratch observed;
  {
    auto t = detail::Clock::now();
    detail::compute_statistic(ctx, 0, observed);
    observed.times.statistic += detail::seconds_since(t);
    result.observed_statistic = std::make_shared<const StatisticMap>(data.mask_ptr(), observed.stat);
    for (std::size_t k = 0; k < n_slots; ++k) {
      StatisticResult sr;
      sr.kind = ctx.slots[k].kind;
      sr.cdt = ctx.slots[k].cdt;
      result.statistics.push_back(std::move(sr));
    }
    for (std::size_t ti = 0; ti < n_tails; ++ti) {
      detail::evaluate_tail(ctx, ctx.tails[ti], observed,
                            std::span<double>(maxima.data() + ti * n_slots, n_slots));
      for (std::size_t k = 0; k < n_slots; ++k) {
        TailResult tr;
        tr.tail = ctx.tails[ti];
        tr.null.identity_max = maxima[ti * n_slots + k];
        const auto& slot = ctx.slots[k];
        if (slot.kind == StatisticKind::tfce) {
          const auto& p = options.params;
          if (options.discretization)
            discretized_by_rank(observed.forest, observed.forest.size() ? observed.forest.height(0) : 0.0, p,
                                *options.discretization, observed.by_rank, observed.label);
          else
            generalized_by_rank(observed.forest, GeneralizedStatistic::tfce(p.E, p.H), observed.by_rank);
          tr.null.observed = scatter_scores(observed.forest, observed.by_rank, data.mask_ptr());
        } else {
          tr.clusters = clusters_at_threshold(observed.forest, *slot.cdt, req.mass_convention);
          tr.null.observed.mask = data.mask_ptr();
          tr.null.observed.scores.assign(data.n_voxels(), 0.0);
          for (const auto& c : tr.clusters.clusters) {
            const double value = slot.kind == StatisticKind::cluster_extent
                                     ? static_cast<double>(c.extent)
                                     : c.mass;
            tr.cluster_statistic.push_back(value);
            for (Voxel v : c.members) tr.null.observed.scores[v] = value;
          }
        }
        result.statistics[k].tails.push_back(std::move(tr));
      }
    }
  }

  // Null randomizations.
  std::atomic<std::int64_t> next{1};
  std::mutex merge;
  std::exception_ptr failure;
  auto work = [&]() {
    detail::Scratch s;
    try {
      for (;;) {
        const std::int64_t b = next.fetch_add(1);
        if (b > n_perm) break;
        auto t = detail::Clock::now();
        detail::compute_statistic(ctx, b, s);
        s.times.statistic += detail::seconds_since(t);
        for (std::size_t ti = 0; ti < n_tails; ++ti)
          detail::evaluate_tail(
              ctx, ctx.tails[ti], s,
              std::span<double>(maxima.data() + static_cast<std::size_t>(b) * stride + ti * n_slots, n_slots));
      }
    } catch (...) {
      std::lock_guard lock(merge);
      if (!failure) failure = std::current_exception();
      next = n_perm + 1;
    }
    std::lock_guard lock(merge);
    result.times += s.times;
  };
  const int workers = std::max(1, options.workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  result.times += observed.times;

  // p-values.
  for (std::size_t k = 0; k < n_slots; ++k) {
    auto& sr = result.statistics[k];
    bool any_cluster = false;
    for (std::size_t ti = 0; ti < n_tails; ++ti) {
      auto& tr = sr.tails[ti];
      tr.null.maxima.resize(static_cast<std::size_t>(n_perm));
      for (std::int64_t b = 1; b <= n_perm; ++b)
        tr.null.maxima[b - 1] = maxima[static_cast<std::size_t>(b) * stride + ti * n_slots + k];
      std::vector<double> sorted = tr.null.maxima;
      std::sort(sorted.begin(), sorted.end());
      tr.p.mask = data.mask_ptr();
      tr.p.p.resize(data.n_voxels());
      if (sr.kind == StatisticKind::tfce) {
        for (std::size_t v = 0; v < data.n_voxels(); ++v) tr.p.p[v] = fwe_p(sorted, tr.null.observed.scores[v]);
      } else {
        std::fill(tr.p.p.begin(), tr.p.p.end(), 1.0);
        for (std::size_t c = 0; c < tr.clusters.clusters.size(); ++c) {
          const double p = fwe_p(sorted, tr.cluster_statistic[c]);
          tr.cluster_p.push_back(p);
          for (Voxel v : tr.clusters.clusters[c].members) tr.p.p[v] = p;
        }
        any_cluster = any_cluster || !tr.clusters.clusters.empty() || sorted.back() > 0.0;
      }
    }
    if (sr.kind != StatisticKind::tfce && !any_cluster)
      result.warnings.push_back(to_string(sr.kind) + ": no voxel reaches cdt " + std::to_string(*sr.cdt) +
                                " in any randomization; cluster p-values set to 1");

    sr.p.mask = data.mask_ptr();
    if (n_tails == 1) {
      sr.p.p = sr.tails[0].p.p;
    } else {
      sr.p.p.resize(data.n_voxels());
      for (std::size_t v = 0; v < data.n_voxels(); ++v)
        sr.p.p[v] = std::min(1.0, 2.0 * std::min(sr.tails[0].p.p[v], sr.tails[1].p.p[v]));
    }
  }
  return result;
}

struct ComparisonReport {
  std::size_t n_voxels = 0;
  double alpha = 0.05;
  double d_plus_pct = 0.0;
  double d_minus_pct = 0.0;
  double mean_d_plus = 0.0;
  double mean_abs_d_minus = 0.0;
  double gain_pct = 0.0;  // significant in a only
  double loss_pct = 0.0;  // significant in b only
  std::vector<Voxel> gain_voxels;
  std::vector<Voxel> loss_voxels;
  std::vector<double> d;  // log10(p_b) - log10(p_a) per voxel
};

/// Voxel-wise comparison of two p-maps; D > 0 where `a` is more significant.
inline ComparisonReport compare_pvalue_maps(const PValueMap& a, const PValueMap& b, double alpha = 0.05) {
  if (!a.mask || !b.mask || !(*a.mask == *b.mask) || a.p.size() != b.p.size())
    throw StructuralError("p-value maps are defined on different masks");
  if (!(alpha > 0.0 && alpha < 1.0)) throw StructuralError("alpha must lie in (0, 1)");
  ComparisonReport r;
  r.alpha = alpha;
  r.n_voxels = a.p.size();
  r.d.resize(r.n_voxels);
  std::size_t plus = 0, minus = 0;
  double sum_plus = 0.0, sum_minus = 0.0;
  for (std::size_t v = 0; v < r.n_voxels; ++v) {
    if (!(a.p[v] > 0.0 && a.p[v] <= 1.0) || !(b.p[v] > 0.0 && b.p[v] <= 1.0))
      throw StructuralError("p-values must lie in (0, 1] (voxel " + std::to_string(v) + ")");
    const double d = std::log10(b.p[v]) - std::log10(a.p[v]);
    r.d[v] = d;
    if (d > 0.0) {
      ++plus;
      sum_plus += d;
    } else if (d < 0.0) {
      ++minus;
      sum_minus -= d;
    }
    const bool sig_a = a.p[v] <= alpha, sig_b = b.p[v] <= alpha;
    if (sig_a && !sig_b) r.gain_voxels.push_back(static_cast<Voxel>(v));
    if (sig_b && !sig_a) r.loss_voxels.push_back(static_cast<Voxel>(v));
  }
  if (r.n_voxels) {
    const double n = static_cast<double>(r.n_voxels);
    r.d_plus_pct = 100.0 * plus / n;
    r.d_minus_pct = 100.0 * minus / n;
    r.gain_pct = 100.0 * r.gain_voxels.size() / n;
    r.loss_pct = 100.0 * r.loss_voxels.size() / n;
  }
  r.mean_d_plus = plus ? sum_plus / plus : 0.0;
  r.mean_abs_d_minus = minus ? sum_minus / minus : 0.0;
  return r;
}

}  // namespace etfce
