#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gig/graph.hpp"
#include "gig/imputer.hpp"
#include "gig/json_util.hpp"

namespace gig {

struct AttributeScore {
  std::size_t missing = 0;
  std::size_t imputed = 0;
  std::size_t true_count = 0;
};

struct EvalReport {
  std::string dataset;
  std::optional<double> pct;  // unset when the missing cells came with the data
  std::size_t missing = 0;
  std::size_t imputed = 0;
  std::size_t true_count = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Nothing was imputed, so precision is reported as 0.
  bool precision_undefined = false;
  std::map<std::string, AttributeScore> per_attribute;
  // Seconds per stage; empty unless timings were requested.
  std::map<std::string, double> stage_seconds;
  std::optional<double> runtime_s;
};

// Imputed cells are correct when the prediction equals the ground truth
// after trimming surrounding whitespace. Decisions for cells absent from the
// ground truth throw ValidationError unless `skip_unknown`.
EvalReport score(const GroundTruth& truth, const std::vector<ImputationDecision>& decisions,
                 bool skip_unknown = false);

json report_to_json(const EvalReport& r);
// Header: dataset,pct,missing,imputed,true,precision,recall,f1,runtime_s.
// Rows sorted by pct.
std::string reports_csv(std::vector<EvalReport> reports);
json reports_json(std::vector<EvalReport> reports);

enum class ReportFormat { Json, Csv };
ReportFormat report_format_from_string(const std::string& s);
void emit_report(const std::vector<EvalReport>& reports, ReportFormat format, const std::string& path);

}  // namespace gig
