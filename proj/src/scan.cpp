#include "pinneig/scan.hpp"

#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>

#include "pinneig/rng.hpp"
#include "pinneig/snapshot.hpp"

namespace pinneig {
namespace {

constexpr std::uint64_t kInitLabel = 0x696e6974ULL;

double score_of(const LossBreakdown& b, StopReason r) {
  if (r == StopReason::diverged || !std::isfinite(b.total)) return std::numeric_limits<double>::infinity();
  return b.total;
}

struct RefinedPoint {
  double e;
  MlpParams params;
  TrainReport report;
  double score() const { return score_of(report.final, report.stop_reason); }
};

std::vector<RefinedPoint> train_points(const std::vector<double>& grid, const MlpParams& start, const OperatorSpec& op,
                                       const Domain& domain, const ScanSettings& s, const TrainingBatches& batches,
                                       std::uint64_t seed) {
  std::vector<RefinedPoint> out;
  out.reserve(grid.size());
  for (double e : grid) {
    auto [params, report] = train_at_E(start, e, op, domain, s.loss, s.train, batches, seed, s.train.warm_max_steps);
    out.push_back({e, std::move(params), std::move(report)});
  }
  return out;
}

std::size_t argmin(const std::vector<RefinedPoint>& pts) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    if (pts[k].score() < pts[best].score()) best = k;
  }
  return best;
}

std::vector<double> centred_grid(double centre, double spacing, int half_count) {
  std::vector<double> g;
  for (int k = -half_count; k <= half_count; ++k) g.push_back(centre + k * spacing);
  return g;
}

}  // namespace

void ScanConfig::validate() const {
  if (!(e_lo < e_hi)) throw std::invalid_argument("E_lo must be below E_hi");
  if (grid_count < 2) throw std::invalid_argument("grid_count must be at least 2");
  if (!(threshold > 0.0)) throw std::invalid_argument("threshold must be positive");
  if (refine_depth < 0) throw std::invalid_argument("refine_depth must be non-negative");
  if (refine_factor < 2) throw std::invalid_argument("refine_factor must be at least 2");
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");
}

double LossCurve::score(std::size_t i) const { return score_of(entries.at(i).breakdown, entries.at(i).stop_reason); }

std::vector<double> make_grid(double e_lo, double e_hi, int count) {
  if (!(e_lo < e_hi)) throw std::invalid_argument("E_lo must be below E_hi");
  if (count < 2) throw std::invalid_argument("grid needs at least two points");
  std::vector<double> grid(count);
  const double span = e_hi - e_lo;
  for (int i = 0; i < count; ++i) grid[i] = e_lo + span * (static_cast<double>(i) / (count - 1));
  grid.back() = e_hi;
  return grid;
}

LossCurve run_scan(const std::vector<double>& grid, const OperatorSpec& op, const Domain& domain,
                   const ScanSettings& settings, std::uint64_t seed, const CurveObserver& observer) {
  if (grid.empty()) throw std::invalid_argument("run_scan needs a nonempty grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("E grid must be strictly increasing");
  }
  validate(op);
  settings.train.validate();
  if (settings.net.input_dim != domain.dim()) {
    throw std::invalid_argument("network input dimension does not match the domain");
  }

  const TrainingBatches batches = make_training_batches(domain, settings.loss, seed);
  const MlpParams fresh = init_params(settings.net, derive_seed(seed, kInitLabel));
  LossCurve curve;
  curve.seed = seed;
  curve.entries.reserve(grid.size());
  auto make_entry = [&](double e, MlpParams params, const TrainReport& report, bool backward) {
    CurveEntry entry;
    entry.e = e;
    entry.breakdown = report.final;
    entry.steps_run = report.steps_run;
    entry.stop_reason = report.stop_reason;
    entry.params_ref = snapshot_id(params, seed);
    entry.params = std::move(params);
    entry.from_backward = backward;
    return entry;
  };
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const bool warm = settings.scan.warm_start && i > 0 &&
                      curve.entries.back().stop_reason != StopReason::diverged;
    const MlpParams& init = warm ? curve.entries.back().params : fresh;
    const int steps = warm ? settings.train.warm_max_steps : settings.train.max_steps;
    auto [params, report] = train_at_E(init, grid[i], op, domain, settings.loss, settings.train, batches, seed, steps);
    curve.entries.push_back(make_entry(grid[i], std::move(params), report, false));
    if (observer) observer(i, curve.entries.back());
  }
  if (!settings.scan.warm_start || !settings.scan.backward_sweep) return curve;
  for (std::size_t i = grid.size() - 1; i-- > 0;) {
    const CurveEntry& right = curve.entries[i + 1];
    if (right.stop_reason == StopReason::diverged) continue;
    auto [params, report] = train_at_E(right.params, grid[i], op, domain, settings.loss, settings.train, batches, seed,
                                       settings.train.warm_max_steps);
    if (!(score_of(report.final, report.stop_reason) < curve.score(i))) continue;
    curve.entries[i] = make_entry(grid[i], std::move(params), report, true);
    if (observer) observer(i, curve.entries[i]);
  }
  return curve;
}

std::vector<std::size_t> detect_minima(const LossCurve& curve, double threshold) {
  std::vector<std::size_t> out;
  if (curve.size() < 3) return out;
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    const double here = curve.score(i);
    if (here < curve.score(i - 1) && here <= curve.score(i + 1) && here < threshold) out.push_back(i);
  }
  return out;
}

EigenEstimate refine(const LossCurve& curve, std::size_t i0, const OperatorSpec& op, const Domain& domain,
                     const ScanSettings& settings, std::uint64_t seed) {
  if (i0 == 0 || i0 + 1 >= curve.size()) throw std::invalid_argument("refinement needs an interior candidate");
  const auto& c = curve.entries[i0];
  EigenEstimate best;
  best.e_hat = c.e;
  best.loss_at_min = c.breakdown.total;
  best.grid_resolution = 0.5 * (curve.entries[i0 + 1].e - curve.entries[i0 - 1].e);
  best.refinement_level = 0;
  best.params_ref = c.params_ref;
  best.params = c.params;
  if (settings.scan.refine_depth == 0) return best;

  const TrainingBatches batches = make_training_batches(domain, settings.loss, seed);
  const int factor = settings.scan.refine_factor;
  double half_width = best.grid_resolution;
  for (int level = 1; level <= settings.scan.refine_depth; ++level) {
    const double spacing = half_width / factor;
    double centre = best.e_hat;
    auto pts = train_points(centred_grid(centre, spacing, factor), best.params, op, domain, settings, batches, seed);
    std::size_t m = argmin(pts);
    const bool at_end = m == 0 || m + 1 == pts.size();
    if (at_end) {
      // Widen once: re-centre the bracket on the offending end.
      centre = pts[m].e;
      pts = train_points(centred_grid(centre, spacing, factor), best.params, op, domain, settings, batches, seed);
      m = argmin(pts);
      if (m == 0 || m + 1 == pts.size()) best.bracketed = false;
    }
    best.e_hat = pts[m].e;
    best.loss_at_min = pts[m].score();
    best.params = pts[m].params;
    best.params_ref = snapshot_id(best.params, seed);
    best.grid_resolution = spacing;
    best.refinement_level = level;
    if (!best.bracketed) break;
    half_width = spacing;
  }
  return best;
}

std::vector<EigenEstimate> refine_all(const LossCurve& curve, const std::vector<std::size_t>& candidates,
                                      const OperatorSpec& op, const Domain& domain, const ScanSettings& settings,
                                      std::uint64_t seed) {
  std::vector<EigenEstimate> results(candidates.size());
  const std::size_t workers = static_cast<std::size_t>(std::max(1, settings.scan.workers));
  for (std::size_t start = 0; start < candidates.size(); start += workers) {
    const std::size_t stop = std::min(candidates.size(), start + workers);
    if (stop - start == 1) {
      results[start] = refine(curve, candidates[start], op, domain, settings, seed);
      continue;
    }
    std::vector<std::future<EigenEstimate>> jobs;
    for (std::size_t k = start; k < stop; ++k) {
      jobs.push_back(std::async(std::launch::async, [&, k] { return refine(curve, candidates[k], op, domain, settings, seed); }));
    }
    for (std::size_t k = start; k < stop; ++k) results[k] = jobs[k - start].get();
  }
  std::vector<EigenEstimate> kept;
  for (auto& r : results) {
    if (std::isfinite(r.loss_at_min) && r.loss_at_min < settings.scan.threshold) kept.push_back(std::move(r));
  }
  return kept;
}

}  // namespace pinneig
