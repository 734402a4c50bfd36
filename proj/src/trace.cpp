#include "wqoe/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wqoe/errors.hpp"

namespace wqoe {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const char* col, std::size_t line) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("trace csv: bad " + std::string(col) + " value '" + s +
                    "' at line " + std::to_string(line));
  }
}

int parse_int(const std::string& s, const char* col, std::size_t line) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("trace csv: bad " + std::string(col) + " value '" + s +
                    "' at line " + std::to_string(line));
  }
}

constexpr const char* kHeader = "session_id,content_id,pattern_id,t,stsq,pi,qoe";

}  // namespace

bool SessionTrace::labeled() const {
  if (samples.empty()) return false;
  return std::all_of(samples.begin(), samples.end(),
                     [](const TraceSample& s) { return s.qoe.has_value(); });
}

void SessionTrace::validate() const {
  if (samples.empty()) throw DataError("trace '" + session_id + "' is empty");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const TraceSample& s = samples[i];
    if (s.t != static_cast<int>(i)) {
      throw DataError("trace '" + session_id + "': timestamp gap at sample " +
                      std::to_string(i) + " (t = " + std::to_string(s.t) + ")");
    }
    if (!(s.stsq >= 0.0 && s.stsq <= 100.0)) {
      throw DataError("trace '" + session_id + "': stsq out of range [0, 100] at t = " +
                      std::to_string(s.t));
    }
    if (s.pi != 0 && s.pi != 1) {
      throw DataError("trace '" + session_id + "': pi must be 0 or 1 at t = " +
                      std::to_string(s.t));
    }
    if (s.qoe && !(*s.qoe >= 0.0 && *s.qoe <= 100.0)) {
      throw DataError("trace '" + session_id + "': qoe out of range [0, 100] at t = " +
                      std::to_string(s.t));
    }
  }
}

SessionTrace load_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("trace csv '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) {
    throw DataError("trace csv '" + path + "': expected header '" +
                    std::string(kHeader) + "', got '" + line + "'");
  }

  SessionTrace trace;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_fields(line);
    if (f.size() != 7) {
      throw DataError("trace csv '" + path + "': expected 7 columns, got " +
                      std::to_string(f.size()) + " at line " + std::to_string(lineno));
    }
    if (trace.samples.empty()) {
      trace.session_id = f[0];
      trace.content_id = f[1];
      trace.pattern_id = f[2];
    } else if (f[0] != trace.session_id || f[1] != trace.content_id ||
               f[2] != trace.pattern_id) {
      throw DataError("trace csv '" + path + "': session metadata changes at line " +
                      std::to_string(lineno));
    }
    TraceSample s;
    s.t = parse_int(f[3], "t", lineno);
    const int expected = static_cast<int>(trace.samples.size());
    if (s.t != expected) {
      throw DataError("trace csv '" + path + "': timestamp gap at line " +
                      std::to_string(lineno) + " (expected t = " +
                      std::to_string(expected) + ", got " + std::to_string(s.t) + ")");
    }
    s.stsq = parse_double(f[4], "stsq", lineno);
    if (!(s.stsq >= 0.0 && s.stsq <= 100.0)) {
      throw DataError("trace csv '" + path + "': stsq out of range [0, 100] at line " +
                      std::to_string(lineno));
    }
    s.pi = parse_int(f[5], "pi", lineno);
    if (s.pi != 0 && s.pi != 1) {
      throw DataError("trace csv '" + path + "': pi must be 0 or 1 at line " +
                      std::to_string(lineno));
    }
    if (!f[6].empty()) {
      double q = parse_double(f[6], "qoe", lineno);
      if (!(q >= 0.0 && q <= 100.0)) {
        throw DataError("trace csv '" + path + "': qoe out of range [0, 100] at line " +
                        std::to_string(lineno));
      }
      s.qoe = q;
    }
    trace.samples.push_back(s);
  }
  if (trace.samples.empty()) {
    throw DataError("trace csv '" + path + "' has no data rows");
  }
  return trace;
}

void save_trace_csv(const SessionTrace& trace, const std::string& path) {
  for (const std::string* id : {&trace.session_id, &trace.content_id, &trace.pattern_id}) {
    if (id->find_first_of(",\n\r") != std::string::npos) {
      throw DataError("trace ids must not contain commas or newlines: '" + *id + "'");
    }
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write trace file '" + path + "'");
  out << kHeader << "\n";
  for (const TraceSample& s : trace.samples) {
    out << trace.session_id << ',' << trace.content_id << ',' << trace.pattern_id
        << ',' << s.t << ',' << format_double(s.stsq) << ',' << s.pi << ',';
    if (s.qoe) out << format_double(*s.qoe);
    out << "\n";
  }
  if (!out) throw DataError("failed while writing '" + path + "'");
}

std::vector<SessionTrace> load_trace_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw DataError("'" + dir + "' is not a directory");
  }
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") {
      paths.push_back(e.path().string());
    }
  }
  if (paths.empty()) throw DataError("no .csv traces found in '" + dir + "'");
  std::vector<SessionTrace> traces;
  traces.reserve(paths.size());
  for (const std::string& p : paths) traces.push_back(load_trace_csv(p));
  std::sort(traces.begin(), traces.end(),
            [](const SessionTrace& a, const SessionTrace& b) {
              return a.session_id < b.session_id;
            });
  for (std::size_t i = 1; i < traces.size(); ++i) {
    if (traces[i].session_id == traces[i - 1].session_id) {
      throw DataError("duplicate session id '" + traces[i].session_id + "' in '" +
                      dir + "'");
    }
  }
  return traces;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace wqoe
