#include "wqoe/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "wqoe/errors.hpp"
#include "wqoe/features.hpp"
#include "wqoe/metrics.hpp"

namespace wqoe {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

EvalReport evaluate(const std::function<Model&(const std::string&)>& model_for,
                    const SplitPlan& plan,
                    const std::vector<SessionTrace>& sessions) {
  std::map<std::string, const SessionTrace*> by_id;
  for (const SessionTrace& s : sessions) by_id[s.session_id] = &s;

  EvalReport report;
  for (const SplitEntry& entry : plan.entries) {
    auto it = by_id.find(entry.test_session);
    if (it == by_id.end()) {
      throw DataError("evaluate: plan references unknown session '" +
                      entry.test_session + "'");
    }
    const SessionTrace& trace = *it->second;
    if (!trace.labeled()) {
      std::cerr << "evaluate: skipping unlabeled test session '"
                << trace.session_id << "'\n";
      ++report.skipped_unlabeled;
      continue;
    }
    Model& model = model_for(entry.test_session);
    const std::vector<double> pred = model.predict_series(trace);
    const std::vector<double> truth = qoe_targets(trace);

    SessionEval row;
    row.session_id = trace.session_id;
    row.length = trace.length();
    const Correlation p = pcc(pred, truth);
    const Correlation s = srocc(pred, truth);
    row.pcc = p.value;
    row.srocc = s.value;
    row.degenerate = p.degenerate || s.degenerate;
    row.rmse = rmse(pred, truth);
    report.sessions.push_back(std::move(row));
  }

  std::sort(report.sessions.begin(), report.sessions.end(),
            [](const SessionEval& a, const SessionEval& b) {
              return a.session_id < b.session_id;
            });

  std::vector<double> ps, ss, rs;
  for (const SessionEval& r : report.sessions) {
    ps.push_back(r.pcc);
    ss.push_back(r.srocc);
    rs.push_back(r.rmse);
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, ps.size()));
  auto mean = [&](const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / n;
  };
  report.mean_pcc = mean(ps);
  report.mean_srocc = mean(ss);
  report.mean_rmse = mean(rs);
  report.median_pcc = median(ps);
  report.median_srocc = median(ss);
  report.median_rmse = median(rs);
  return report;
}

EvalReport evaluate(Model& model, const SplitPlan& plan,
                    const std::vector<SessionTrace>& sessions) {
  return evaluate([&model](const std::string&) -> Model& { return model; }, plan,
                  sessions);
}

void write_eval_report_csv(const EvalReport& report, const std::string& path,
                           const std::vector<std::pair<std::string, std::string>>& header) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report '" + path + "'");
  for (const auto& [k, v] : header) out << "# " << k << " = " << v << "\n";
  out << "session_id,pcc,srocc,rmse,length,degenerate\n";
  for (const SessionEval& r : report.sessions) {
    out << r.session_id << ',' << format_double(r.pcc) << ','
        << format_double(r.srocc) << ',' << format_double(r.rmse) << ','
        << r.length << ',' << (r.degenerate ? 1 : 0) << "\n";
  }
  out << "mean," << format_double(report.mean_pcc) << ','
      << format_double(report.mean_srocc) << ',' << format_double(report.mean_rmse)
      << ",,\n";
  out << "median," << format_double(report.median_pcc) << ','
      << format_double(report.median_srocc) << ','
      << format_double(report.median_rmse) << ",,\n";
}

std::string render_eval_table(const EvalReport& report) {
  std::string s;
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %8s %8s %8s %6s %s\n", "session", "pcc",
                "srocc", "rmse", "len", "flags");
  s += line;
  for (const SessionEval& r : report.sessions) {
    std::snprintf(line, sizeof(line), "%-16s %8.4f %8.4f %8.3f %6zu %s\n",
                  r.session_id.c_str(), r.pcc, r.srocc, r.rmse, r.length,
                  r.degenerate ? "degenerate" : "");
    s += line;
  }
  std::snprintf(line, sizeof(line), "%-16s %8.4f %8.4f %8.3f\n", "mean",
                report.mean_pcc, report.mean_srocc, report.mean_rmse);
  s += line;
  std::snprintf(line, sizeof(line), "%-16s %8.4f %8.4f %8.3f\n", "median",
                report.median_pcc, report.median_srocc, report.median_rmse);
  s += line;
  if (report.skipped_unlabeled > 0) {
    std::snprintf(line, sizeof(line), "(skipped %d unlabeled test sessions)\n",
                  report.skipped_unlabeled);
    s += line;
  }
  return s;
}

void write_predictions_csv(Model& model, const SessionTrace& trace,
                           const std::string& path) {
  const std::vector<double> pred = model.predict_series(trace);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write predictions '" + path + "'");
  out << "session_id,t,qoe_true,qoe_pred\n";
  for (std::size_t t = 0; t < trace.length(); ++t) {
    out << trace.session_id << ',' << t << ',';
    if (trace.samples[t].qoe) out << format_double(*trace.samples[t].qoe);
    out << ',' << format_double(pred[t]) << "\n";
  }
}

}  // namespace wqoe
