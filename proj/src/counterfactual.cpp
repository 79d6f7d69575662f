#include "nephro/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace nephro {

namespace {

int class_of(double p1) { return p1 > 0.5 ? 1 : 0; }

double eval_row(const BatchModel& p1, const std::vector<double>& row) {
  Matrix m(1, static_cast<Eigen::Index>(row.size()));
  for (std::size_t j = 0; j < row.size(); ++j) m(0, static_cast<Eigen::Index>(j)) = row[j];
  return p1(m)(0);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

std::vector<double> to_vec(Row r) { return {r.begin(), r.end()}; }

Counterfactual make_cf(const FeatureSpace& space, Row original, std::vector<double> row, double p1,
                       std::size_t candidate, double penalty) {
  Counterfactual cf;
  cf.changed.resize(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) cf.changed[j] = row[j] != original[j];
  cf.distance = weighted_l1(space, original, row);
  cf.objective = cf.distance + penalty * static_cast<double>(cf.n_changed());
  cf.row = std::move(row);
  cf.proba1 = p1;
  cf.predicted_class = class_of(p1);
  cf.candidate = candidate;
  return cf;
}

nlohmann::json row_json(const FeatureSpace& space, const std::vector<double>& row) {
  nlohmann::json out = nlohmann::json::object();
  for (std::size_t j = 0; j < row.size() && j < space.size(); ++j) out[space.names[j]] = row[j];
  return out;
}

nlohmann::json cf_json(const FeatureSpace& space, const Counterfactual& cf) {
  std::vector<std::string> changed;
  for (std::size_t j = 0; j < cf.changed.size(); ++j) {
    if (cf.changed[j]) changed.push_back(space.names[j]);
  }
  return {{"row", row_json(space, cf.row)}, {"predicted_class", cf.predicted_class},
          {"proba1", cf.proba1},            {"distance", cf.distance},
          {"objective", cf.objective},      {"changed", changed}};
}

}  // namespace

FeatureSpace FeatureSpace::from_data(const Matrix& x, const FeatureInfo& info) {
  if (x.rows() == 0) throw ConfigError("feature space needs data");
  FeatureSpace s;
  const auto d = static_cast<std::size_t>(x.cols());
  for (std::size_t j = 0; j < d; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    s.names.push_back(j < info.names.size() ? info.names[j] : "x" + std::to_string(j));
    const bool nom = j < info.nominal.size() && info.nominal[j];
    s.nominal.push_back(nom);
    std::vector<double> col;
    col.reserve(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) col.push_back(x(i, c));
    s.lower.push_back(*std::min_element(col.begin(), col.end()));
    s.upper.push_back(*std::max_element(col.begin(), col.end()));
    const double med = median_of(col);
    s.medians.push_back(med);
    std::set<double> cats;
    std::vector<double> q;
    if (nom) {
      cats.insert(col.begin(), col.end());
      s.scale.push_back(1.0);
    } else {
      std::vector<double> sorted = col;
      std::sort(sorted.begin(), sorted.end());
      for (int k = 0; k <= 100; ++k) {
        const double pos = k / 100.0 * static_cast<double>(sorted.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const auto hi = std::min(lo + 1, sorted.size() - 1);
        q.push_back(sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]));
      }
      std::vector<double> dev;
      for (double v : col) dev.push_back(std::abs(v - med));
      std::sort(dev.begin(), dev.end());
      const std::size_t n = dev.size();
      double mad = n % 2 ? dev[n / 2] : 0.5 * (dev[n / 2 - 1] + dev[n / 2]);
      if (!(mad > 0)) {
        const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
        double var = 0;
        for (double v : col) var += (v - mean) * (v - mean);
        mad = std::sqrt(var / static_cast<double>(n));
      }
      s.scale.push_back(mad > 0 ? mad : 1.0);
    }
    s.categories.emplace_back(cats.begin(), cats.end());
    s.quantiles.push_back(std::move(q));
  }
  return s;
}

std::size_t FeatureSpace::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("unknown feature '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

double weighted_l1(const FeatureSpace& space, Row a, Row b) {
  double d = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (space.nominal[j]) {
      d += a[j] != b[j] ? 1.0 : 0.0;
    } else {
      d += std::abs(a[j] - b[j]) / space.scale[j];
    }
  }
  return d;
}

std::size_t Counterfactual::n_changed() const {
  return static_cast<std::size_t>(std::count(changed.begin(), changed.end(), true));
}

nlohmann::json CounterfactualSet::to_json(const FeatureSpace& space) const {
  nlohmann::json cfs = nlohmann::json::array();
  for (const auto& cf : counterfactuals) cfs.push_back(cf_json(space, cf));
  nlohmann::json out{{"original", row_json(space, original)},
                     {"original_class", original_class},
                     {"original_proba1", original_proba1},
                     {"target_class", target_class},
                     {"found", found},
                     {"counterfactuals", cfs},
                     {"notes", notes}};
  if (best_invalid) out["best_invalid"] = cf_json(space, *best_invalid);
  return out;
}

CounterfactualSet counterfactual_search(const BatchModel& p1, Row row, const FeatureSpace& space,
                                        const CounterfactualOptions& options, std::uint64_t seed) {
  const std::size_t d = row.size();
  if (d != space.size()) throw ConfigError("row width does not match the feature space");
  if (options.k < 1) throw ConfigError("k must be >= 1");
  if (options.budget < 1) throw ConfigError("budget must be >= 1");

  std::vector<bool> immutable(d, false);
  for (const auto& name : options.immutables) immutable[space.index_of(name)] = true;
  std::vector<std::size_t> mutable_idx;
  for (std::size_t j = 0; j < d; ++j) {
    const bool fixed_range = !space.nominal[j] && !(space.upper[j] > space.lower[j]);
    const bool single_cat = space.nominal[j] && space.categories[j].size() < 2;
    if (!immutable[j] && !fixed_range && !single_cat) mutable_idx.push_back(j);
  }

  CounterfactualSet out;
  out.original = to_vec(row);
  out.original_proba1 = eval_row(p1, out.original);
  out.original_class = class_of(out.original_proba1);
  out.target_class = options.target_class < 0 ? 1 - out.original_class : options.target_class;
  if (out.target_class != 0 && out.target_class != 1) throw ConfigError("target class must be 0 or 1");

  if (out.target_class == out.original_class) {
    out.counterfactuals.push_back(make_cf(space, row, out.original, out.original_proba1, 0, 0.0));
    out.found = true;
    out.notes.push_back("row already predicted as the target class");
    return out;
  }
  if (mutable_idx.empty()) throw ConfigError("no mutable features");

  // Candidate c draws from its own stream, so a larger budget extends a smaller one.
  const auto budget = static_cast<std::size_t>(options.budget);
  Matrix cand(static_cast<Eigen::Index>(budget), static_cast<Eigen::Index>(d));
  for (std::size_t c = 0; c < budget; ++c) {
    Rng rng(derive_seed(seed, c));
    auto idx = mutable_idx;
    std::shuffle(idx.begin(), idx.end(), rng);
    std::uniform_int_distribution<std::size_t> how_many(1, idx.size());
    idx.resize(how_many(rng));
    const auto r = static_cast<Eigen::Index>(c);
    for (std::size_t j = 0; j < d; ++j) cand(r, static_cast<Eigen::Index>(j)) = row[j];
    for (auto j : idx) {
      double v;
      if (space.nominal[j]) {
        std::vector<double> others;
        for (double cat : space.categories[j]) {
          if (cat != row[j]) others.push_back(cat);
        }
        if (others.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
        v = others[pick(rng)];
      } else if (j < space.quantiles.size() && space.quantiles[j].size() > 1 &&
                 std::bernoulli_distribution(0.5)(rng)) {
        // Half the draws follow the data distribution; uniform draws alone rarely
        // land in the dense region of a long-tailed feature.
        const auto& q = space.quantiles[j];
        const double pos = std::uniform_real_distribution<double>(0.0, static_cast<double>(q.size() - 1))(rng);
        const auto lo = std::min(static_cast<std::size_t>(pos), q.size() - 2);
        v = q[lo] + (pos - static_cast<double>(lo)) * (q[lo + 1] - q[lo]);
      } else {
        std::uniform_real_distribution<double> u(space.lower[j], space.upper[j]);
        v = u(rng);
      }
      cand(r, static_cast<Eigen::Index>(j)) = v;
    }
  }
  const Vector p = p1(cand);

  // Refine every valid candidate: revert features that are not needed, then
  // bisect the remaining numeric ones toward the original.
  std::vector<std::optional<Counterfactual>> refined(budget);
  kernels::for_each_index(budget, [&](std::size_t c) {
    const auto r = static_cast<Eigen::Index>(c);
    if (class_of(p(r)) != out.target_class) return;
    std::vector<double> x(cand.row(r).data(), cand.row(r).data() + d);
    double px = p(r);
    for (std::size_t j = 0; j < d; ++j) {
      if (x[j] == row[j]) continue;
      const double keep = x[j];
      x[j] = row[j];
      const double pr = eval_row(p1, x);
      if (class_of(pr) == out.target_class) {
        px = pr;
        continue;
      }
      x[j] = keep;
      if (space.nominal[j]) continue;
      double valid = keep, invalid = row[j];
      const double tol = 1e-3 * space.scale[j];
      while (std::abs(valid - invalid) > tol) {
        const double mid = 0.5 * (valid + invalid);
        x[j] = mid;
        const double pm = eval_row(p1, x);
        if (class_of(pm) == out.target_class) {
          valid = mid;
          px = pm;
        } else {
          invalid = mid;
        }
      }
      x[j] = valid;
    }
    refined[c] = make_cf(space, row, std::move(x), px, c, options.sparsity_penalty);
  });

  std::vector<Counterfactual> valid;
  for (auto& r : refined) {
    if (r) valid.push_back(std::move(*r));
  }
  if (valid.empty()) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < budget; ++c) {
      const auto score = [&](std::size_t i) {
        const double v = p(static_cast<Eigen::Index>(i));
        return out.target_class == 1 ? v : 1.0 - v;
      };
      if (score(c) > score(best)) best = c;
    }
    const auto r = static_cast<Eigen::Index>(best);
    out.best_invalid = make_cf(space, row, std::vector<double>(cand.row(r).data(), cand.row(r).data() + d), p(r),
                               best, options.sparsity_penalty);
    out.notes.push_back("no valid counterfactual within budget " + std::to_string(budget) +
                        "; best invalid attempt reported");
    warn(out.notes.back());
    return out;
  }

  std::stable_sort(valid.begin(), valid.end(), [](const Counterfactual& a, const Counterfactual& b) {
    if (a.objective != b.objective) return a.objective < b.objective;
    return a.candidate < b.candidate;
  });
  for (auto& cf : valid) {
    if (out.counterfactuals.size() >= static_cast<std::size_t>(options.k)) break;
    const bool dup = std::any_of(out.counterfactuals.begin(), out.counterfactuals.end(),
                                 [&](const Counterfactual& o) {
                                   return weighted_l1(space, o.row, cf.row) < options.min_separation;
                                 });
    if (!dup) out.counterfactuals.push_back(std::move(cf));
  }
  std::stable_sort(out.counterfactuals.begin(), out.counterfactuals.end(),
                   [](const Counterfactual& a, const Counterfactual& b) {
                     if (a.distance != b.distance) return a.distance < b.distance;
                     return a.candidate < b.candidate;
                   });
  out.found = true;
  if (out.counterfactuals.size() < static_cast<std::size_t>(options.k)) {
    out.notes.push_back("only " + std::to_string(out.counterfactuals.size()) + " distinct counterfactuals found");
  }
  return out;
}

// ---------------------------------------------------------------- CEM

nlohmann::json CemResult::to_json(const FeatureSpace& space) const {
  nlohmann::json out{{"mode", mode == CemMode::kPertinentNegative ? "pertinent_negative" : "pertinent_positive"},
                     {"original", row_json(space, original)},
                     {"explained", row_json(space, explained)},
                     {"sparsity", sparsity},
                     {"achieved_class", achieved_class},
                     {"proba1", proba1},
                     {"flagged", flagged},
                     {"method", method},
                     {"notes", notes}};
  if (mode == CemMode::kPertinentNegative) {
    nlohmann::json dj = nlohmann::json::object();
    for (std::size_t j = 0; j < delta.size(); ++j) {
      if (delta[j] != 0) dj[space.names[j]] = delta[j];
    }
    out["delta"] = dj;
  } else {
    std::vector<std::string> kept;
    for (std::size_t j = 0; j < retained.size(); ++j) {
      if (retained[j]) kept.push_back(space.names[j]);
    }
    out["retained"] = kept;
  }
  return out;
}

namespace {

std::vector<double> masked_row(Row row, const FeatureSpace& space, std::uint64_t mask) {
  std::vector<double> r(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) r[j] = (mask >> j) & 1ULL ? row[j] : space.medians[j];
  return r;
}

CemResult pp_result(Row row, const FeatureSpace& space, std::uint64_t mask, double p, const char* method) {
  CemResult out;
  out.mode = CemMode::kPertinentPositive;
  out.original = to_vec(row);
  out.retained.resize(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out.retained[j] = (mask >> j) & 1ULL;
  out.explained = masked_row(row, space, mask);
  out.sparsity = static_cast<std::size_t>(__builtin_popcountll(mask));
  out.proba1 = p;
  out.achieved_class = class_of(p);
  out.method = method;
  return out;
}

CemResult pp_exhaustive(const BatchModel& p1, Row row, const FeatureSpace& space) {
  const std::size_t d = row.size();
  const int cls = class_of(eval_row(p1, to_vec(row)));
  const std::uint64_t full = (1ULL << d) - 1;
  // Proper, non-empty subsets.
  std::vector<std::uint64_t> masks;
  for (std::uint64_t m = 1; m < full; ++m) masks.push_back(m);
  Matrix batch(static_cast<Eigen::Index>(masks.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const auto r = masked_row(row, space, masks[i]);
    for (std::size_t j = 0; j < d; ++j) batch(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[j];
  }
  const Vector p = masks.empty() ? Vector() : p1(batch);
  std::optional<std::size_t> best;
  auto keep_score = [&](std::size_t i) { return cls == 1 ? p(static_cast<Eigen::Index>(i)) : 1.0 - p(static_cast<Eigen::Index>(i)); };
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (class_of(p(static_cast<Eigen::Index>(i))) != cls) continue;
    if (!best) {
      best = i;
      continue;
    }
    const int si = __builtin_popcountll(masks[i]), sb = __builtin_popcountll(masks[*best]);
    if (si < sb || (si == sb && keep_score(i) > keep_score(*best))) best = i;
  }
  if (!best) {
    auto out = pp_result(row, space, full, eval_row(p1, to_vec(row)), "exhaustive");
    out.flagged = true;
    out.notes.push_back("no proper feature subset preserves the predicted class; full set returned");
    return out;
  }
  return pp_result(row, space, masks[*best], p(static_cast<Eigen::Index>(*best)), "exhaustive");
}

}  // namespace

CemResult pertinent_positive_greedy(const BatchModel& p1, Row row, const FeatureSpace& space) {
  const std::size_t d = row.size();
  if (d > 63) throw ConfigError("at most 63 features supported");
  const int cls = class_of(eval_row(p1, to_vec(row)));
  const std::uint64_t full = d == 0 ? 0 : (1ULL << d) - 1;
  std::uint64_t mask = 0;
  while (mask != full) {
    std::vector<std::size_t> options;
    for (std::size_t j = 0; j < d; ++j) {
      if (!((mask >> j) & 1ULL)) options.push_back(j);
    }
    Matrix batch(static_cast<Eigen::Index>(options.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < options.size(); ++i) {
      const auto r = masked_row(row, space, mask | (1ULL << options[i]));
      for (std::size_t j = 0; j < d; ++j) batch(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[j];
    }
    const Vector p = p1(batch);
    std::size_t best = 0;
    auto score = [&](std::size_t i) { return cls == 1 ? p(static_cast<Eigen::Index>(i)) : 1.0 - p(static_cast<Eigen::Index>(i)); };
    for (std::size_t i = 1; i < options.size(); ++i) {
      if (score(i) > score(best)) best = i;
    }
    mask |= 1ULL << options[best];
    if (mask != full && class_of(p(static_cast<Eigen::Index>(best))) == cls) {
      return pp_result(row, space, mask, p(static_cast<Eigen::Index>(best)), "greedy");
    }
  }
  auto out = pp_result(row, space, full, eval_row(p1, to_vec(row)), "greedy");
  out.flagged = true;
  out.notes.push_back("no proper feature subset preserves the predicted class; full set returned");
  return out;
}

CemResult cem_explain(const BatchModel& p1, Row row, CemMode mode, const FeatureSpace& space,
                      const CounterfactualOptions& options, std::uint64_t seed) {
  if (row.size() != space.size()) throw ConfigError("row width does not match the feature space");
  if (mode == CemMode::kPertinentPositive) {
    return row.size() <= kMaxExhaustivePpFeatures ? pp_exhaustive(p1, row, space)
                                                  : pertinent_positive_greedy(p1, row, space);
  }
  auto opts = options;
  opts.target_class = -1;
  const auto set = counterfactual_search(p1, row, space, opts, seed);
  CemResult out;
  out.mode = CemMode::kPertinentNegative;
  out.original = to_vec(row);
  out.method = "counterfactual search";
  out.notes = set.notes;
  if (!set.found) {
    out.flagged = true;
    const auto& best = *set.best_invalid;
    out.explained = best.row;
    out.proba1 = best.proba1;
    out.achieved_class = best.predicted_class;
    out.sparsity = best.n_changed();
  } else {
    const auto it = std::min_element(set.counterfactuals.begin(), set.counterfactuals.end(),
                                      [](const Counterfactual& a, const Counterfactual& b) {
                                        if (a.n_changed() != b.n_changed()) return a.n_changed() < b.n_changed();
                                        return a.distance < b.distance;
                                      });
    out.explained = it->row;
    out.proba1 = it->proba1;
    out.achieved_class = it->predicted_class;
    out.sparsity = it->n_changed();
  }
  out.delta.resize(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out.delta[j] = out.explained[j] - row[j];
  return out;
}

}  // namespace nephro
