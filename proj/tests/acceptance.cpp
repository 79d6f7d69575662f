// Acceptance suite: one PASS/FAIL line per primary criterion. Exit status is
// the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "nephro/attribution.hpp"
#include "nephro/counterfactual.hpp"
#include "nephro/imputation.hpp"
#include "nephro/kernels.hpp"
#include "nephro/metrics.hpp"
#include "nephro/missingness.hpp"
#include "nephro/pipeline.hpp"
#include "nephro/resampling.hpp"
#include "nephro/selection.hpp"
#include "support.hpp"

using namespace nephro;
using namespace nephro::testing;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %2d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

PipelineConfig base_config(const std::string& tag, std::uint64_t seed) {
  auto c = PipelineConfig::load(source_path("config/default.ini"));
  c.seed = seed;
  c.canonical = true;
  c.plots = false;
  c.out = (fs::temp_directory_path() / ("nephro_acceptance_" + tag)).string();
  fs::remove_all(c.out);
  return c;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return "{" + s + "}";
}

// ---------------------------------------------------------------- 1, 2

void pipeline_accuracy() {
  kernels::set_default_mode(kernels::Mode::kSerial);
  const auto t0 = std::chrono::steady_clock::now();
  Pipeline p(base_config("accuracy", 42));
  p.run_train();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  kernels::set_default_mode(kernels::Mode::kParallel);
  const auto& rf = p.evaluation(Family::kRF).cumulative_metrics;
  const auto& lr = p.evaluation(Family::kLR).cumulative_metrics;
  const bool ok = rf.accuracy >= 0.95 && rf.f1 >= 0.95 && lr.accuracy >= 0.94 && secs < 60;
  report(1, "pipeline accuracy", ok,
         "RF acc " + fmt("%.3f", rf.accuracy) + " F1 " + fmt("%.3f", rf.f1) + " (>= 0.95), LR acc " +
             fmt("%.3f", lr.accuracy) + " (>= 0.94), serial impute+select+SMOTE+10-fold over 7 families " +
             fmt("%.1f", secs) + " s (< 60)");
}

void confusion_shape() {
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto c = base_config("confusion", seed);
    c.families = {Family::kRF};
    Pipeline p(c);
    const auto& cm = p.evaluation(Family::kRF).cumulative;
    const long wrong = cm.fp + cm.fn;
    ok = ok && wrong <= 15 && cm.total() == 500;
    detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) + ": " +
              std::to_string(wrong) + "/" + std::to_string(cm.total());
  }
  report(2, "RF confusion matrix shape", ok, "misclassified " + detail + " (<= 15 each)");
}

// ---------------------------------------------------------------- 3, 4

void metrics_fixture() {
  const auto fx = PublishedMetricsFixture::load(source_path("data/published_scorecard.json"));
  const auto reports = fx.evaluate();
  bool within = true, exact = true;
  std::string mismatches;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const auto& p = fx.rows[i];
    const std::pair<double, double> cells[4] = {{r.interpretability, p.interpretability},
                                                {r.fidelity.f1, p.fidelity},
                                                {r.fii, p.fii},
                                                {r.facc, p.facc}};
    const char* names[4] = {"I", "F", "FII", "FAcc"};
    for (int k = 0; k < 4; ++k) {
      within = within && std::abs(cells[k].first - cells[k].second) <= 0.01 + 1e-12;
      const bool strict_row = p.model == "AdaBoost" || p.model == "Random Forest";
      if (strict_row && std::abs(round_half_up(cells[k].first) - cells[k].second) > 1e-9) {
        exact = false;
        mismatches += " " + p.model + " " + names[k] + " " + fmt("%.4f", cells[k].first) + "->" +
                      fmt("%.2f", round_half_up(cells[k].first)) + " vs " + fmt("%.2f", cells[k].second) + ";";
      }
    }
  }
  report(3, "metrics fixture", within && exact,
         std::string("all cells within 0.01: ") + (within ? "yes" : "no") +
             "; AdaBoost/RF exact at 2 decimals: " + (exact ? "yes" : "no," + mismatches));
}

void fidelity_arithmetic() {
  const auto f = external_fidelity({"hemo", "al", "dm", "sc"}, {"hemo", "al"});
  const bool ok = f.precision == 0.5 && f.recall == 1.0 && round_half_up(f.f1) == 0.67;
  report(4, "fidelity arithmetic", ok,
         "P " + fmt("%.2f", f.precision) + ", R " + fmt("%.2f", f.recall) + ", F1 " + fmt("%.4f", f.f1));
}

// ---------------------------------------------------------------- 5, 6

void shapley_axioms() {
  const auto smooth = rowwise([](Row r) {
    return 1.0 / (1.0 + std::exp(-(r[0] * r[1] - 0.5 * r[2] + 0.3 * r[3] * r[3] - r[4] + 0.2 * r[5] * r[0])));
  });
  const Matrix bg = gaussian_matrix(30, 6, 1);
  const Matrix rows = gaussian_matrix(100, 6, 2);
  double eff = 0, samp = 0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const auto a = shapley_exact(smooth, row_of(rows, i), bg);
    eff = std::max(eff, std::abs(a.efficiency_gap()));
    if (i < 5) {
      const auto s = shapley_sampled(smooth, row_of(rows, i), bg, 2048, 100 + static_cast<std::uint64_t>(i));
      for (std::size_t j = 0; j < 6; ++j) samp = std::max(samp, std::abs(s.phi[j] - a.phi[j]));
    }
  }
  Matrix dup = gaussian_matrix(25, 3, 3);
  dup.col(1) = dup.col(0);
  const auto sym_f = rowwise([](Row r) { return r[0] * r[1] + std::sin(r[0] + r[1]) + r[2] * (r[0] + r[1]); });
  double sym = 0;
  for (double v : {-1.3, 0.2, 2.0}) {
    const auto a = shapley_exact(sym_f, std::vector<double>{v, v, 0.7}, dup);
    sym = std::max(sym, std::abs(a.phi[0] - a.phi[1]));
  }
  const std::vector<double> coef{1.5, -2.0, 0.0, 0.25};
  const Matrix abg = gaussian_matrix(60, 4, 4);
  const Matrix arows = gaussian_matrix(10, 4, 5);
  double add = 0;
  for (Eigen::Index i = 0; i < arows.rows(); ++i) {
    const auto a = shapley_exact(linear_model(coef, 3.0), row_of(arows, i), abg);
    for (std::size_t j = 0; j < 4; ++j) {
      const auto c = static_cast<Eigen::Index>(j);
      add = std::max(add, std::abs(a.phi[j] - coef[j] * (arows(i, c) - abg.col(c).mean())));
    }
  }
  const bool ok = eff <= 1e-6 && sym <= 1e-9 && add <= 1e-9 && samp <= 0.02;
  report(5, "Shapley axioms", ok,
         "efficiency gap " + fmt("%.1e", eff) + " (<= 1e-6, 100 rows), symmetry " + fmt("%.1e", sym) +
             " (<= 1e-9), additive " + fmt("%.1e", add) + " (<= 1e-9), sampled@2048 max error " + fmt("%.4f", samp) +
             " (<= 0.02)");
}

void explainer_sanity() {
  const Matrix x = gaussian_matrix(200, 3, 1);
  const auto f = rowwise([](Row r) { return 2 * r[0] + r[0] * r[2] + std::sin(r[2]); });
  const auto info = FeatureInfo::numeric(3);
  auto spread = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
  };
  const double flat = std::max(spread(pdp(f, x, info, 1).values), spread(ale(f, x, info, 1).values));

  const std::vector<double> coef{2.0, -3.0, 1.5, -0.75};
  const Matrix bg = gaussian_matrix(300, 4, 1);
  LimeOptions o;
  o.discretize = false;
  int sign_ok = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto e = lime_explain(linear_model(coef, 0.5), std::vector<double>{0.3, -0.2, 1.0, 0.5}, bg,
                                FeatureInfo::numeric(4), o, seed);
    bool all = true;
    for (std::size_t j = 0; j < 4; ++j) all = all && ((e.terms[j].weight > 0) == (coef[j] > 0));
    sign_ok += all;
  }

  const Matrix z = gaussian_matrix(500, 1, 4, 2.0);
  const auto g = ale(linear_model({3.0}), z, FeatureInfo::numeric(1), 0, 10);
  double slope_err = 0;
  for (std::size_t k = 0; k + 1 < g.grid.size(); ++k) {
    slope_err = std::max(slope_err, std::abs((g.values[k + 1] - g.values[k]) / (g.grid[k + 1] - g.grid[k]) - 3.0));
  }
  const bool ok = flat < 1e-9 && sign_ok == 20 && slope_err <= 1e-6;
  report(6, "explainer sanity", ok,
         "PDP/ALE spread for ignored feature " + fmt("%.1e", flat) + " (< 1e-9), LIME signs recovered " +
             std::to_string(sign_ok) + "/20 seeds, ALE slope error " + fmt("%.1e", slope_err) + " (<= 1e-6)");
}

// ---------------------------------------------------------------- 7

void counterfactual_oracle() {
  Matrix line(201, 1);
  for (int i = 0; i < 201; ++i) line(i, 0) = 0.1 * i;
  const auto space1 = FeatureSpace::from_data(line, FeatureInfo::numeric(1));
  const auto step = rowwise([](Row r) { return r[0] > 10.0 ? 0.9 : 0.1; });
  const auto set = counterfactual_search(step, std::vector<double>{4.0}, space1, {}, 1);
  const double err = set.found ? std::abs(set.counterfactuals.front().row[0] - 10.0) : 1e9;
  const double tol = 0.01 * space1.scale[0];

  Matrix x = gaussian_matrix(300, 3, 12);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = 50 + 15 * x(i, 0);
    x(i, 1) = 3 + 2 * x(i, 1);
    x(i, 2) = x(i, 2) > 0.5 ? 1.0 : 0.0;
  }
  const FeatureInfo info{{"age", "lab", "flag"}, {false, false, true}};
  const auto space = FeatureSpace::from_data(x, info);
  const auto p1 = rowwise([](Row r) {
    return 1.0 / (1.0 + std::exp(-(0.05 * (r[0] - 50) + 1.2 * (r[1] - 3) + 1.5 * r[2])));
  });
  CounterfactualOptions o;
  o.k = 3;
  o.budget = 300;
  o.immutables = {"age"};
  int valid = 0, total = 0, searches = 0;
  for (Eigen::Index i = 0; searches < 200; i = (i + 7) % x.rows(), ++searches) {
    const auto row = row_of(x, i);
    const auto s = counterfactual_search(p1, row, space, o, static_cast<std::uint64_t>(searches));
    if (!s.found) {
      ++total;
      continue;
    }
    for (const auto& cf : s.counterfactuals) {
      ++total;
      const auto check = p1(Eigen::Map<const Matrix>(cf.row.data(), 1, 3))(0) > 0.5 ? 1 : 0;
      valid += check == s.target_class && cf.row[0] == row[0];
    }
  }
  const bool ok = err <= tol && valid == total;
  report(7, "counterfactual oracle", ok,
         "threshold error " + fmt("%.2e", err) + " (<= 0.01 MAD = " + fmt("%.3f", tol) + "), " + std::to_string(valid) +
             "/" + std::to_string(total) + " counterfactuals valid and immutable over 200 searches");
}

// ---------------------------------------------------------------- 8

void smote_and_folds() {
  Pipeline p(base_config("smote", 42));
  const auto& data = p.modeling();
  const auto& b = p.balanced();
  const long n0 = std::count(b.y.begin(), b.y.end(), 0), n1 = std::count(b.y.begin(), b.y.end(), 1);
  const long o0 = std::count(data.y.begin(), data.y.end(), 0), o1 = std::count(data.y.begin(), data.y.end(), 1);

  std::vector<Eigen::Index> minority;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (data.y[i] == 1) minority.push_back(static_cast<Eigen::Index>(i));
  }
  std::vector<Eigen::Index> numeric;
  for (std::size_t j = 0; j < data.cols(); ++j) {
    if (!data.nominal(j)) numeric.push_back(static_cast<Eigen::Index>(j));
  }
  auto project = [&](const Matrix& m, Eigen::Index r) {
    Vector v(static_cast<Eigen::Index>(numeric.size()));
    for (std::size_t k = 0; k < numeric.size(); ++k) v(static_cast<Eigen::Index>(k)) = m(r, numeric[k]);
    return v;
  };
  // Standardized distances so the tolerance is unit-free.
  Vector sd(static_cast<Eigen::Index>(numeric.size()));
  for (std::size_t k = 0; k < numeric.size(); ++k) {
    const auto col = data.x.col(numeric[k]).array();
    sd(static_cast<Eigen::Index>(k)) = std::sqrt((col - col.mean()).square().mean());
  }
  std::size_t on_segment = 0;
  const auto synth = b.x.rows() - static_cast<Eigen::Index>(b.n_original);
  for (Eigen::Index s = static_cast<Eigen::Index>(b.n_original); s < b.x.rows(); ++s) {
    const Vector pt = project(b.x, s).cwiseQuotient(sd);
    double best = 1e300;
    for (auto a : minority) {
      const Vector pa = project(data.x, a).cwiseQuotient(sd);
      for (auto c : minority) {
        if (a == c) continue;
        const Vector dv = project(data.x, c).cwiseQuotient(sd) - pa;
        const double n2 = dv.squaredNorm();
        const double lam = n2 > 0 ? std::clamp((pt - pa).dot(dv) / n2, 0.0, 1.0) : 0.0;
        best = std::min(best, (pa + lam * dv - pt).norm());
      }
    }
    on_segment += best < 1e-9;
  }

  const auto& folds = p.folds();
  bool fold_ok = folds.k == 10;
  for (int k = 0; k < folds.k; ++k) {
    const auto test = folds.test_rows(k);
    const auto c0 = std::count_if(test.begin(), test.end(), [&](std::size_t r) { return b.y[r] == 0; });
    fold_ok = fold_ok && test.size() == 50 && c0 == 25;
  }

  Pipeline q(base_config("smote_again", 42));
  const bool same = q.balanced().x == b.x && q.folds().fold == folds.fold;
  const bool ok = o0 == 250 && o1 == 150 && n0 == 250 && n1 == 250 && on_segment == static_cast<std::size_t>(synth) &&
                  fold_ok && same;
  report(8, "SMOTE and stratified folds", ok,
         std::to_string(o0) + "/" + std::to_string(o1) + " -> " + std::to_string(n0) + "/" + std::to_string(n1) +
             ", " + std::to_string(on_segment) + "/" + std::to_string(synth) +
             " synthetic rows on a minority segment, 10 folds of 50 at 25/25: " + (fold_ok ? "yes" : "no") +
             ", same seed identical: " + (same ? "yes" : "no"));
}

// ---------------------------------------------------------------- 9

void mcar_calibration() {
  int false_rej = 0, power = 0;
  for (int trial = 0; trial < 200; ++trial) {
    false_rej += little_mcar_test(mcar_synthetic(500, 4, 0.1, derive_seed(2024, static_cast<std::uint64_t>(trial))))
                     .p_value <= 0.05;
    power += little_mcar_test(mar_synthetic(500, 4, derive_seed(77, static_cast<std::uint64_t>(trial)))).p_value <= 0.05;
  }
  const bool ok = false_rej <= 20 && power >= 160;
  report(9, "Little MCAR calibration", ok,
         "false rejections " + std::to_string(false_rej) + "/200 at 0.05 (<= 20), MAR rejections " +
             std::to_string(power) + "/200 (>= 160)");
}

// ---------------------------------------------------------------- 10

void imputation_oracle() {
  const Schema line({{"x", ColumnKind::kNumeric, {}, "", std::nullopt},
                     {"y", ColumnKind::kNumeric, {}, "", std::nullopt},
                     {"class", ColumnKind::kNominal, {"ckd", "notckd"}, "", std::nullopt}},
                    "class");
  std::ostringstream csv;
  csv << "x,y,class\n";
  for (int i = 0; i < 30; ++i) csv << i << ',' << (i == 5 ? "?" : std::to_string(2 * i + 1)) << ',' << (i % 2 ? "ckd" : "notckd") << '\n';
  std::istringstream in(csv.str());
  const auto lt = parse_dataset(in, line);
  const auto lo = apply_imputation(lt, fit_imputation_plan(lt));
  const double line_err = std::abs(lo.table.at(5, 1) - 11.0);

  const auto schema = Schema::load(source_path("data/ckd_schema.json"));
  const auto t = parse_dataset_file(source_path("data/ckd.csv"), schema);
  const auto plan = fit_imputation_plan(t);
  const auto once = apply_imputation(t, plan);
  const auto twice = apply_imputation(once.table, plan);
  const bool idempotent = once.table.cells() == twice.table.cells();
  std::size_t changed_observed = 0, flagged = 0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      flagged += once.origin(r, c) != CellOrigin::kObserved;
      if (!t.missing(r, c)) changed_observed += once.table.at(r, c) != t.at(r, c);
    }
  }
  const bool ok = line_err <= 1e-6 && idempotent && changed_observed == 0 && flagged == t.missing_count();
  report(10, "imputation oracle", ok,
         "y=2x+1 error " + fmt("%.1e", line_err) + " (<= 1e-6), idempotent: " + (idempotent ? "yes" : "no") +
             ", observed cells changed " + std::to_string(changed_observed) + ", provenance " + std::to_string(flagged) +
             " = missing " + std::to_string(t.missing_count()));
}

// ---------------------------------------------------------------- 11

void selection_fixtures() {
  std::ifstream in(source_path("data/published_method_sets.json"));
  const auto doc = nlohmann::json::parse(in);
  const auto sets = doc.at("method_sets").get<std::map<std::string, std::vector<std::string>>>();
  const auto published_consensus = doc.at("consensus").get<std::vector<std::string>>();
  const auto exclusions = doc.at("exclusions").get<std::vector<std::string>>();
  const auto published_final = doc.at("final").get<std::vector<std::string>>();
  auto as_set = [](const std::vector<std::string>& v) { return std::set<std::string>(v.begin(), v.end()); };

  Pipeline p(base_config("selection", 42));
  const auto vt = p.run_select();
  const auto vt_set = vt["methods"]["variance_threshold"]["selected"].get<std::vector<std::string>>();
  const bool vt_ok = as_set(vt_set) == as_set(sets.at("variance_threshold"));

  const auto cons = consensus_select(sets, exclusions);
  const bool cons_ok = as_set(cons.consensus) == as_set(published_consensus);
  const auto fin = consensus_select({{"a", published_consensus}, {"b", published_consensus}}, exclusions);
  const bool final_ok = as_set(fin.final_set) == as_set(published_final);

  const auto& ms = p.selection().method_sets;
  const double fwd = overlap_coefficient(ms.at("forward"), sets.at("forward"));
  const double rfe = overlap_coefficient(ms.at("rfe"), sets.at("rfe"));
  const bool ok = vt_ok && cons_ok && final_ok && fwd >= 0.6 - 1e-12 && rfe >= 0.6 - 1e-12;
  report(11, "selection fixtures", ok,
         std::string("variance threshold reproduces the published set: ") + (vt_ok ? "yes" : "no") +
             "; consensus of the published method sets " + std::to_string(cons.consensus.size()) + " features " +
             join(cons.consensus) + " vs published 13: " + (cons_ok ? "match" : "differ") +
             "; published 13 minus exclusions " + join(fin.final_set) + " vs published final 6: " +
             (final_ok ? "match" : "differ") + "; forward overlap " + fmt("%.2f", fwd) + ", RFE overlap " +
             fmt("%.2f", rfe) + " (>= 0.60)");
}

}  // namespace

int main() {
  const std::pair<const char*, void (*)()> criteria[] = {
      {"pipeline accuracy", pipeline_accuracy},  {"confusion shape", confusion_shape},
      {"metrics fixture", metrics_fixture},      {"fidelity arithmetic", fidelity_arithmetic},
      {"Shapley axioms", shapley_axioms},        {"explainer sanity", explainer_sanity},
      {"counterfactual oracle", counterfactual_oracle}, {"SMOTE and folds", smote_and_folds},
      {"MCAR calibration", mcar_calibration},    {"imputation oracle", imputation_oracle},
      {"selection fixtures", selection_fixtures},
  };
  int id = 0;
  for (const auto& [name, fn] : criteria) {
    ++id;
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, name, false, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d of %d criteria failed\n", failures, id);
  return failures;
}
