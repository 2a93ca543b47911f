#include "gig/eval.hpp"

#include <algorithm>
#include <set>

#include "gig/error.hpp"

namespace gig {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double ratio(std::size_t a, std::size_t b) {
  return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
}

void sort_by_pct(std::vector<EvalReport>& reports) {
  std::stable_sort(reports.begin(), reports.end(), [](const EvalReport& a, const EvalReport& b) {
    return a.pct.value_or(-1.0) < b.pct.value_or(-1.0);
  });
}

}  // namespace

EvalReport score(const GroundTruth& truth, const std::vector<ImputationDecision>& decisions, bool skip_unknown) {
  EvalReport r;
  std::map<std::pair<std::string, std::string>, std::string> expected;
  for (const auto& e : truth.entries) {
    expected[{e.eid, e.attribute}] = trim(e.value.render());
    ++r.per_attribute[e.attribute].missing;
  }
  r.missing = expected.size();

  std::set<std::pair<std::string, std::string>> scored;
  for (const auto& d : decisions) {
    auto key = std::make_pair(d.site.eid, d.site.attribute);
    auto it = expected.find(key);
    if (it == expected.end()) {
      if (skip_unknown) continue;
      throw ValidationError("decision for " + d.site.eid + "." + d.site.attribute + " has no ground truth");
    }
    if (!scored.insert(key).second) {
      throw ValidationError("two decisions for " + d.site.eid + "." + d.site.attribute);
    }
    if (d.status != DecisionStatus::Imputed || !d.predicted) continue;
    auto& a = r.per_attribute[d.site.attribute];
    ++r.imputed;
    ++a.imputed;
    if (trim(*d.predicted) == it->second) {
      ++r.true_count;
      ++a.true_count;
    }
  }

  r.precision_undefined = r.imputed == 0;
  r.precision = ratio(r.true_count, r.imputed);
  r.recall = ratio(r.true_count, r.missing);
  r.f1 = r.precision + r.recall == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

json report_to_json(const EvalReport& r) {
  json per = json::object();
  for (const auto& [attr, s] : r.per_attribute) {
    per[attr] = {{"missing", s.missing}, {"imputed", s.imputed}, {"true", s.true_count}};
  }
  json j{{"dataset", r.dataset},
         {"pct", r.pct ? json(*r.pct) : json(nullptr)},
         {"missing", r.missing},
         {"imputed", r.imputed},
         {"true", r.true_count},
         {"precision", r.precision},
         {"recall", r.recall},
         {"f1", r.f1},
         {"runtime_s", r.runtime_s ? json(*r.runtime_s) : json(nullptr)},
         {"precision_undefined", r.precision_undefined},
         {"per_attribute", per}};
  if (!r.stage_seconds.empty()) j["stage_seconds"] = r.stage_seconds;
  return j;
}

std::string reports_csv(std::vector<EvalReport> reports) {
  sort_by_pct(reports);
  std::string out = "dataset,pct,missing,imputed,true,precision,recall,f1,runtime_s\n";
  for (const auto& r : reports) {
    csv::Row row{r.dataset,
                 r.pct ? format_number(*r.pct) : "",
                 std::to_string(r.missing),
                 std::to_string(r.imputed),
                 std::to_string(r.true_count),
                 format_number(r.precision),
                 format_number(r.recall),
                 format_number(r.f1),
                 r.runtime_s ? format_number(*r.runtime_s) : ""};
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv::escape(row[i]);
    out += "\n";
  }
  return out;
}

json reports_json(std::vector<EvalReport> reports) {
  sort_by_pct(reports);
  json list = json::array();
  for (const auto& r : reports) list.push_back(report_to_json(r));
  return json{{"reports", list}};
}

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  throw ValidationError("unknown report format '" + s + "' (json or csv)");
}

void emit_report(const std::vector<EvalReport>& reports, ReportFormat format, const std::string& path) {
  if (format == ReportFormat::Csv) {
    write_text_file(path, reports_csv(reports));
  } else {
    write_text_file(path, reports_json(reports).dump(2) + "\n");
  }
}

}  // namespace gig
