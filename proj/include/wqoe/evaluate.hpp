#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "wqoe/model_io.hpp"
#include "wqoe/split.hpp"
#include "wqoe/trace.hpp"

namespace wqoe {

struct SessionEval {
  std::string session_id;
  double pcc = 0.0;
  double srocc = 0.0;
  double rmse = 0.0;  // QoE units, 0-100 scale
  std::size_t length = 0;
  bool degenerate = false;  // either correlation was undefined
};

struct EvalReport {
  std::vector<SessionEval> sessions;  // sorted by session id
  double mean_pcc = 0.0, mean_srocc = 0.0, mean_rmse = 0.0;
  double median_pcc = 0.0, median_srocc = 0.0, median_rmse = 0.0;
  int skipped_unlabeled = 0;
};

/// Predicts every test session of the plan with one shared model and scores
/// it against the subjective labels. Unlabeled test sessions are skipped
/// with a warning.
EvalReport evaluate(Model& model, const SplitPlan& plan,
                    const std::vector<SessionTrace>& sessions);

/// Per-entry variant: the resolver maps a test session id to the model
/// trained for that entry.
EvalReport evaluate(const std::function<Model&(const std::string&)>& model_for,
                    const SplitPlan& plan,
                    const std::vector<SessionTrace>& sessions);

void write_eval_report_csv(const EvalReport& report, const std::string& path,
                           const std::vector<std::pair<std::string, std::string>>& header);

/// Human-readable fixed-width table.
std::string render_eval_table(const EvalReport& report);

/// Per-second prediction rows: session_id,t,qoe_true,qoe_pred.
void write_predictions_csv(Model& model, const SessionTrace& trace,
                           const std::string& path);

}  // namespace wqoe
