#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "oracles.hpp"
#include "wqoe/errors.hpp"
#include "wqoe/features.hpp"
#include "wqoe/rng.hpp"
#include "wqoe/split.hpp"
#include "wqoe/synthetic.hpp"
#include "wqoe/trace.hpp"

using namespace wqoe;

namespace {

SessionTrace trace_from(const std::vector<double>& stsq, const std::vector<int>& pi,
                        const std::string& id = "t0") {
  SessionTrace t;
  t.session_id = id;
  t.content_id = "c";
  t.pattern_id = "p";
  for (std::size_t i = 0; i < stsq.size(); ++i) {
    t.samples.push_back({static_cast<int>(i), stsq[i], pi[i], 50.0});
  }
  return t;
}

std::filesystem::path temp_dir(const char* name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("derive_features golden traces") {
  SUBCASE("one rebuffering run") {
    auto fm = derive_features(trace_from({50, 50, 50, 50, 50, 50}, {0, 0, 1, 1, 0, 0}));
    const std::vector<double> nr{0, 0, 1, 1, 1, 1};
    const std::vector<double> tr{1, 2, 0, 0, 1, 2};
    for (std::size_t t = 0; t < 6; ++t) {
      CHECK(fm.values.at(kNr, t) == nr[t]);
      CHECK(fm.values.at(kTr, t) == tr[t]);
    }
  }
  SUBCASE("no rebuffering") {
    auto fm = derive_features(trace_from({50, 50, 50, 50}, {0, 0, 0, 0}));
    for (std::size_t t = 0; t < 4; ++t) {
      CHECK(fm.values.at(kNr, t) == 0.0);
      CHECK(fm.values.at(kTr, t) == static_cast<double>(t + 1));
    }
  }
  SUBCASE("two distinct runs") {
    auto fm = derive_features(trace_from({50, 50, 50, 50}, {1, 0, 1, 0}));
    const std::vector<double> nr{1, 1, 2, 2};
    const std::vector<double> tr{0, 1, 0, 1};
    for (std::size_t t = 0; t < 4; ++t) {
      CHECK(fm.values.at(kNr, t) == nr[t]);
      CHECK(fm.values.at(kTr, t) == tr[t]);
    }
  }
}

TEST_CASE("derive_features matches the naive recount oracle") {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t T = 2 + rng.below(60);
    std::vector<int> pi(T);
    std::vector<double> stsq(T, 40.0);
    for (auto& v : pi) v = rng.uniform() < 0.3 ? 1 : 0;
    auto fm = derive_features(trace_from(stsq, pi));
    auto ref = oracles::recount_features(pi);
    double prev_nr = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      CHECK(fm.values.at(kNr, t) == ref.nr[t]);
      CHECK(fm.values.at(kTr, t) == ref.tr[t]);
      CHECK(fm.values.at(kNr, t) >= prev_nr);  // NR never decreases
      if (pi[t] == 1) CHECK(fm.values.at(kTr, t) == 0.0);
      if (pi[t] == 0) CHECK(fm.values.at(kTr, t) > 0.0);
      prev_nr = fm.values.at(kNr, t);
    }
  }
}

TEST_CASE("derive_features is idempotent on its own output trace") {
  auto t = trace_from({50, 60, 70, 80}, {0, 1, 0, 0});
  auto fm1 = derive_features(t);
  auto fm2 = derive_features(t);
  CHECK(fm1.values.data == fm2.values.data);
}

TEST_CASE("normalize golden arithmetic and round trip") {
  NormStats stats;
  stats.feature_mean = {50, 0, 0, 0};
  stats.feature_std = {50, 1, 1, 1};
  stats.qoe_mean = 50;
  stats.qoe_std = 50;

  FeatureMatrix fm{Tensor::zeros({4, 2})};
  fm.values.at(kStsq, 0) = 0;
  fm.values.at(kStsq, 1) = 100;
  auto out = normalize(fm, stats);
  CHECK(out.values.at(kStsq, 0) == -1.0);
  CHECK(out.values.at(kStsq, 1) == 1.0);

  for (double q : {0.0, 31.7, 100.0}) {
    CHECK(std::abs(denormalize_qoe(normalize_qoe(q, stats), stats) - q) <= 1e-12);
  }
}

TEST_CASE("constant feature row normalizes to zeros via the std floor") {
  std::vector<FeatureMatrix> fms;
  fms.push_back(derive_features(trace_from({70, 70, 70}, {0, 0, 0})));
  std::vector<std::vector<double>> targets{{50, 50, 50}};
  auto stats = compute_norm_stats(fms, targets);
  CHECK(stats.feature_std[kStsq] == 1e-6);
  auto out = normalize(fms[0], stats);
  for (std::size_t t = 0; t < 3; ++t) CHECK(out.values.at(kStsq, t) == 0.0);
}

TEST_CASE("normalize rejects non-finite stats") {
  NormStats stats;
  stats.feature_std = {1, 1, 1, 1};
  stats.feature_mean[2] = std::numeric_limits<double>::quiet_NaN();
  FeatureMatrix fm{Tensor::zeros({4, 3})};
  CHECK_THROWS_AS(normalize(fm, stats), DataError);
}

TEST_CASE("synthetic generator pins determinism and stall semantics") {
  SyntheticConfig cfg;
  cfg.seed = 77;
  cfg.num_sessions = 6;
  cfg.duration_s = 60;
  cfg.stall_intensity = 0.5;

  auto a = generate_synthetic(cfg);
  auto b = generate_synthetic(cfg);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].session_id == b[i].session_id);
    REQUIRE(a[i].samples.size() == b[i].samples.size());
    for (std::size_t t = 0; t < a[i].samples.size(); ++t) {
      CHECK(a[i].samples[t].stsq == b[i].samples[t].stsq);
      CHECK(a[i].samples[t].pi == b[i].samples[t].pi);
      CHECK(*a[i].samples[t].qoe == *b[i].samples[t].qoe);
    }
  }

  cfg.stall_intensity = 0.0;
  for (const auto& t : generate_synthetic(cfg)) {
    for (const auto& s : t.samples) CHECK(s.pi == 0);
  }

  cfg.stall_intensity = 1.5;
  CHECK_THROWS_AS(generate_synthetic(cfg), DataError);
  cfg.stall_intensity = 0.5;
  cfg.duration_s = 10;
  CHECK_THROWS_AS(generate_synthetic(cfg), DataError);
}

TEST_CASE("synthetic qoe stays in range and traces validate") {
  SyntheticConfig cfg;
  cfg.seed = 5;
  cfg.num_sessions = 8;
  cfg.duration_s = 90;
  cfg.stall_intensity = 1.0;
  for (const auto& t : generate_synthetic(cfg)) {
    t.validate();
    CHECK(t.labeled());
    for (const auto& s : t.samples) {
      CHECK(*s.qoe >= 0.0);
      CHECK(*s.qoe <= 100.0);
    }
  }
}

TEST_CASE("synthetic qoe oracle matches a hand-evaluated recursion") {
  const std::vector<double> stsq{60, 60, 50, 50, 70, 70};
  const std::vector<int> pi{0, 0, 1, 1, 0, 0};
  // Tr = (1, 2, 0, 0, 1, 2); recency penalty = 20 * max(0, 1 - Tr/15).
  const double q0 = 60.0;
  const double q1 = 0.8 * q0 + 0.2 * (60.0 - 20.0 * (1.0 - 2.0 / 15.0));
  const double q2 = 0.8 * q1 + 0.2 * (50.0 - 40.0 - 20.0);
  const double q3 = 0.8 * q2 + 0.2 * (50.0 - 40.0 - 20.0);
  const double q4 = 0.8 * q3 + 0.2 * (70.0 - 20.0 * (1.0 - 1.0 / 15.0));
  const double q5 = 0.8 * q4 + 0.2 * (70.0 - 20.0 * (1.0 - 2.0 / 15.0));

  const auto qoe = synthetic_qoe_oracle(stsq, pi);
  const std::vector<double> expected{q0, q1, q2, q3, q4, q5};
  REQUIRE(qoe.size() == expected.size());
  for (std::size_t t = 0; t < qoe.size(); ++t) {
    CHECK(qoe[t] == doctest::Approx(expected[t]).epsilon(1e-12));
  }
}

TEST_CASE("lfovia-loo split on a 6x6 grid leaves 25 training sessions") {
  SyntheticConfig cfg;
  cfg.seed = 3;
  cfg.num_sessions = 36;
  cfg.duration_s = 30;
  cfg.stall_intensity = 0.2;
  auto sessions = generate_synthetic(cfg);
  auto plan = build_split_plan(sessions, SplitProtocol::lfovia_loo, 0);
  REQUIRE(plan.entries.size() == 36);
  for (const auto& e : plan.entries) {
    CHECK(e.train_sessions.size() == 25);
    for (const auto& id : e.train_sessions) CHECK(id != e.test_session);
  }

  // No training session shares content or pattern with its test session.
  std::map<std::string, const SessionTrace*> by_id;
  for (const auto& s : sessions) by_id[s.session_id] = &s;
  for (const auto& e : plan.entries) {
    const auto* test = by_id.at(e.test_session);
    for (const auto& id : e.train_sessions) {
      const auto* tr = by_id.at(id);
      CHECK(tr->content_id != test->content_id);
      CHECK(tr->pattern_id != test->pattern_id);
    }
  }
}

TEST_CASE("lfovia-loo requires metadata") {
  SyntheticConfig cfg;
  cfg.seed = 3;
  cfg.num_sessions = 4;
  cfg.duration_s = 30;
  auto sessions = generate_synthetic(cfg);
  sessions[1].content_id.clear();
  CHECK_THROWS_WITH_AS(build_split_plan(sessions, SplitProtocol::lfovia_loo, 0),
                       doctest::Contains("content"), DataError);
}

TEST_CASE("live-random80 split sizes and degenerate rejection") {
  SyntheticConfig cfg;
  cfg.seed = 8;
  cfg.duration_s = 30;

  cfg.num_sessions = 174;
  auto sessions = generate_synthetic(cfg);
  auto plan = build_split_plan(sessions, SplitProtocol::live_random80, 42);
  REQUIRE(plan.entries.size() == 174);
  for (const auto& e : plan.entries) {
    CHECK(e.train_sessions.size() == 138);  // floor(0.8 * 173)
    for (const auto& id : e.train_sessions) CHECK(id != e.test_session);
  }

  cfg.num_sessions = 2;
  auto two = generate_synthetic(cfg);
  CHECK_THROWS_WITH_AS(build_split_plan(two, SplitProtocol::live_random80, 42),
                       doctest::Contains("degenerate"), DataError);
}

TEST_CASE("holdout split takes the last k sessions as tests") {
  SyntheticConfig cfg;
  cfg.seed = 8;
  cfg.num_sessions = 10;
  cfg.duration_s = 30;
  auto sessions = generate_synthetic(cfg);
  auto plan = build_split_plan(sessions, SplitProtocol::holdout, 0, 3);
  REQUIRE(plan.entries.size() == 3);
  CHECK(plan.entries[0].test_session == "s00007");
  CHECK(plan.entries[2].test_session == "s00009");
  for (const auto& e : plan.entries) CHECK(e.train_sessions.size() == 7);
  CHECK_THROWS_AS(build_split_plan(sessions, SplitProtocol::holdout, 0, 10), DataError);
}

TEST_CASE("trace csv round trip is exact") {
  auto dir = temp_dir("wqoe_trace_rt");
  SyntheticConfig cfg;
  cfg.seed = 21;
  cfg.num_sessions = 1;
  cfg.duration_s = 45;
  cfg.stall_intensity = 0.8;
  auto traces = generate_synthetic(cfg);
  const auto path = (dir / "t.csv").string();
  save_trace_csv(traces[0], path);
  auto loaded = load_trace_csv(path);
  CHECK(loaded.session_id == traces[0].session_id);
  CHECK(loaded.content_id == traces[0].content_id);
  CHECK(loaded.pattern_id == traces[0].pattern_id);
  REQUIRE(loaded.samples.size() == traces[0].samples.size());
  for (std::size_t t = 0; t < loaded.samples.size(); ++t) {
    CHECK(loaded.samples[t].stsq == traces[0].samples[t].stsq);
    CHECK(loaded.samples[t].pi == traces[0].samples[t].pi);
    CHECK(*loaded.samples[t].qoe == *traces[0].samples[t].qoe);
  }
}

TEST_CASE("trace csv diagnostics carry line numbers") {
  auto dir = temp_dir("wqoe_trace_err");

  SUBCASE("minimal file parses") {
    const auto p = (dir / "ok.csv").string();
    std::ofstream(p) << "session_id,content_id,pattern_id,t,stsq,pi,qoe\n"
                     << "s,c,p,0,50,0,40\n"
                     << "s,c,p,1,51,0,41\n"
                     << "s,c,p,2,52,1,\n";
    auto t = load_trace_csv(p);
    CHECK(t.length() == 3);
    CHECK_FALSE(t.labeled());  // one row lacks qoe
  }
  SUBCASE("timestamp gap names the line") {
    const auto p = (dir / "gap.csv").string();
    std::ofstream(p) << "session_id,content_id,pattern_id,t,stsq,pi,qoe\n"
                     << "s,c,p,0,50,0,40\n"
                     << "s,c,p,1,51,0,41\n"
                     << "s,c,p,3,52,0,42\n";
    CHECK_THROWS_WITH_AS(load_trace_csv(p), doctest::Contains("gap at line 4"),
                         DataError);
  }
  SUBCASE("missing column") {
    const auto p = (dir / "cols.csv").string();
    std::ofstream(p) << "session_id,content_id,pattern_id,t,stsq,pi,qoe\n"
                     << "s,c,p,0,50,0\n";
    CHECK_THROWS_WITH_AS(load_trace_csv(p), doctest::Contains("7 columns"), DataError);
  }
  SUBCASE("out of range stsq") {
    const auto p = (dir / "range.csv").string();
    std::ofstream(p) << "session_id,content_id,pattern_id,t,stsq,pi,qoe\n"
                     << "s,c,p,0,150,0,40\n";
    CHECK_THROWS_WITH_AS(load_trace_csv(p), doctest::Contains("stsq out of range"),
                         DataError);
  }
  SUBCASE("wrong header") {
    const auto p = (dir / "hdr.csv").string();
    std::ofstream(p) << "time,stsq\n0,50\n";
    CHECK_THROWS_WITH_AS(load_trace_csv(p), doctest::Contains("header"), DataError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(load_trace_csv((dir / "nope.csv").string()),
                         doctest::Contains("cannot open"), DataError);
  }
}

TEST_CASE("qoe_targets rejects unlabeled traces") {
  SessionTrace t = trace_from({50, 50}, {0, 0});
  t.samples[1].qoe.reset();
  CHECK_THROWS_AS(qoe_targets(t), DataError);
}
