#include "render.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <vector>

namespace nephro::render {

namespace {

using Table = std::vector<std::vector<std::string>>;

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string cell(const nlohmann::json& v) {
  if (v.is_number_integer() || v.is_number_unsigned()) return std::to_string(v.get<long long>());
  if (v.is_number()) return fmt(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "yes" : "no";
  if (v.is_array()) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + cell(x);
    return s;
  }
  return v.dump();
}

void table(std::ostringstream& out, const Table& rows) {
  if (rows.empty()) return;
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      out << rows[i][c];
      if (c + 1 < rows[i].size()) out << std::string(width[c] - rows[i][c].size() + 2, ' ');
    }
    out << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      out << std::string(total - 2, '-') << '\n';
    }
  }
}

void notes(std::ostringstream& out, const nlohmann::json& doc) {
  if (!doc.contains("notes")) return;
  for (const auto& n : doc.at("notes")) out << "note: " << n.get<std::string>() << '\n';
}

void profile(std::ostringstream& out, const nlohmann::json& d) {
  out << "rows " << d["rows"] << ", missing cells " << d["missing_cells"] << ", classes " << d["class_counts"].dump()
      << "\n\n";
  Table t{{"feature", "missing", "percent"}};
  for (const auto& f : d["missingness"]["features"]) {
    t.push_back({cell(f["feature"]), cell(f["missing_count"]), fmt(f["missing_percent"].get<double>(), "%.2f")});
  }
  table(out, t);
  notes(out, d);
}

void mcar(std::ostringstream& out, const nlohmann::json& d) {
  Table t{{"fraction", "rows", "chi2", "df", "p-value", "rejects"}};
  for (const auto& r : d["tests"]) {
    t.push_back({fmt(r["fraction"].get<double>(), "%.2f"), cell(r["sample_size"]), fmt(r["statistic"].get<double>(), "%.2f"),
                 cell(r["degrees_of_freedom"]), fmt(r["p_value"].get<double>(), "%.3g"), cell(r["rejects_mcar_at_0.005"])});
  }
  table(out, t);
}

void imputation(std::ostringstream& out, const nlohmann::json& d) {
  out << "missing " << d["missing_cells"] << ", imputed " << d["imputed_cells"] << ", mean/mode fallback "
      << d["fallback_cells"] << '\n';
}

void selection(std::ostringstream& out, const nlohmann::json& d) {
  Table t{{"method", "selected"}};
  for (const auto& [name, sets] : d["consensus"]["method_sets"].items()) t.push_back({name, cell(sets)});
  table(out, t);
  out << "\nconsensus  " << cell(d["consensus"]["consensus"]) << '\n';
  out << "final      " << cell(d["consensus"]["final"]) << '\n';
  out << "modeling   " << cell(d["modeling_features"]) << '\n';
  notes(out, d);
}

void evaluation(std::ostringstream& out, const nlohmann::json& d) {
  Table t{{"model", "precision", "recall", "f1", "accuracy"}};
  for (const auto& r : d["summary"]) {
    t.push_back({cell(r["model"]), cell(r["precision"]), cell(r["recall"]), cell(r["f1"]), cell(r["accuracy"])});
  }
  table(out, t);
  const auto& cm = d["confusion_matrix"];
  out << "\n" << d["primary"].get<std::string>() << " cumulative confusion (" << cm["total"] << " rows)\n";
  Table c{{"", "pred CKD", "pred notCKD"},
          {"CKD", cell(cm["tp"]), cell(cm["fn"])},
          {"notCKD", cell(cm["fp"]), cell(cm["tn"])}};
  table(out, c);
  notes(out, d);
}

void explanations(std::ostringstream& out, const nlohmann::json& d) {
  out << "row " << d["row"] << ", P(" << d["explained_class"].get<std::string>() << ") = "
      << fmt(d["probability"].get<double>()) << "\n\n";
  Table t{{"feature", "value", "shapley", "lime condition", "lime weight"}};
  const auto& terms = d["lime"]["terms"];
  for (const auto& c : d["shapley"]["contributions"]) {
    const auto name = c["feature"].get<std::string>();
    const auto it = std::find_if(terms.begin(), terms.end(), [&](const auto& x) { return x["feature"] == name; });
    t.push_back({name, cell(d["values"][name]), cell(c["phi"]), it != terms.end() ? cell((*it)["condition"]) : "",
                 it != terms.end() ? cell((*it)["weight"]) : ""});
  }
  table(out, t);
  out << "\nmean |shapley| over " << d["global"]["n_rows"] << " rows\n";
  Table g{{"feature", "mean |phi|"}};
  for (const auto& r : d["global"]["ranking"]) g.push_back({cell(r["feature"]), cell(r["mean_abs_phi"])});
  table(out, g);
}

void counterfactuals(std::ostringstream& out, const nlohmann::json& d) {
  Table t;
  std::vector<std::string> header{"", "class"};
  for (const auto& c : d["table"][0]["cells"]) header.push_back(c["feature"].get<std::string>());
  t.push_back(header);
  for (const auto& r : d["table"]) {
    std::vector<std::string> row{r["label"].get<std::string>(), r["class"].get<std::string>()};
    for (const auto& c : r["cells"]) row.push_back(cell(c["value"]) + (c["changed"].get<bool>() ? "*" : ""));
    t.push_back(row);
  }
  table(out, t);
  out << "(* changed)\n";
  notes(out, d["counterfactuals"]);
}

void scorecard_rows(std::ostringstream& out, const nlohmann::json& sc) {
  Table t{{"model", "n", "I", "F", "FII", "FAcc"}};
  for (const auto& r : sc["rows"]) {
    const auto& disp = r["display"];
    t.push_back({cell(r["model"]), cell(r["n_important"]), fmt(disp["interpretability"].get<double>(), "%.2f"),
                 fmt(disp["fidelity"].get<double>(), "%.2f"), fmt(disp["fii"].get<double>(), "%.2f"),
                 fmt(disp["facc"].get<double>(), "%.2f")});
  }
  table(out, t);
}

void scorecard(std::ostringstream& out, const nlohmann::json& d) {
  if (d.contains("published_inputs")) {
    out << "published importances and sets\n";
    scorecard_rows(out, d["published_inputs"]["scorecard"]);
    out << '\n';
  }
  out << "models trained here (" << d["computed"]["explainer"].get<std::string>() << " explanations)\n";
  scorecard_rows(out, d["computed"]["scorecard"]);
}

void manifest(std::ostringstream& out, const nlohmann::json& d) {
  Table t{{"artifact", "bytes"}};
  for (const auto& a : d["artifacts"]) t.push_back({cell(a["path"]), cell(a["bytes"])});
  table(out, t);
}

}  // namespace

std::string text(const nlohmann::json& report) {
  std::ostringstream out;
  const auto kind = report.value("report", std::string());
  if (kind == "profile") profile(out, report);
  else if (kind == "mcar") mcar(out, report);
  else if (kind == "imputation") imputation(out, report);
  else if (kind == "selection") selection(out, report);
  else if (kind == "evaluation") evaluation(out, report);
  else if (kind == "explanations") explanations(out, report);
  else if (kind == "counterfactuals") counterfactuals(out, report);
  else if (kind == "scorecard") scorecard(out, report);
  else if (kind == "manifest") manifest(out, report);
  else out << report.dump(2) << '\n';
  return out.str();
}

}  // namespace nephro::render
