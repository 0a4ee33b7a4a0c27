#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "intentloop/error.hpp"
#include "intentloop/eval.hpp"
#include "intentloop/pipeline.hpp"
#include "intentloop/stats.hpp"
#include "oracles.hpp"

using namespace intentloop;

namespace {

TrialRow row(int trial, double latency_s, double estimate_ms = 200.0, double delay_ms = 350.0) {
  TrialRow r;
  r.trial = trial;
  r.fixation_offset_s = 10.0 * trial;
  r.tap_s = r.fixation_offset_s + latency_s;
  r.estimate_ms = estimate_ms;
  r.tone_delay_ms = delay_ms;
  return r;
}

TrialTable latency_table(Rng& rng, int n) {
  TrialTable t;
  for (int i = 0; i < n; ++i) t.push_back(row(i, rng.uniform(2.0, 3.0), 190.0 + rng.uniform(0.0, 20.0)));
  return t;
}

Recording white_recording(Rng& rng, double seconds, const std::string& channel = "FCz") {
  Recording r;
  r.rate = 250.0;
  r.channels = {channel};
  const auto n = static_cast<Eigen::Index>(seconds * 250.0);
  r.data.resize(1, n);
  for (Eigen::Index i = 0; i < n; ++i) r.data(0, i) = rng.normal(0.0, 10.0);
  return r;
}

double rms(const Vector& v) { return std::sqrt(v.squaredNorm() / static_cast<double>(v.size())); }

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("Tukey fences reject the gross outlier") {
    const std::vector<double> v{1, 2, 3, 4, 100};
    CHECK(tukey_reject(v) == std::vector<bool>{true, true, true, true, false});
  }

  TEST_CASE("all-equal values are kept") {
    const std::vector<double> v(10, 4.2);
    for (bool k : tukey_reject(v)) CHECK(k);
  }

  TEST_CASE("Gaussian samples lose under 1% at k = 3") {
    Rng rng(70);
    const auto v = testing::random_vector(rng, 1000);
    const auto keep = tukey_reject(v);
    CHECK(std::count(keep.begin(), keep.end(), false) < 10);
  }

  TEST_CASE("Tukey matches the fence oracle on random samples") {
    Rng rng(71);
    for (int trial = 0; trial < 200; ++trial) {
      auto v = testing::random_vector(rng, 4 + rng.index(40));
      if (rng.uniform() < 0.5) v[0] += 20.0;
      const double k = rng.uniform(0.5, 3.0);
      const auto f = oracle::tukey_fences(v, k);
      const auto keep = tukey_reject(v, k);
      for (std::size_t i = 0; i < v.size(); ++i) CHECK(keep[i] == (v[i] >= f.lower && v[i] <= f.upper));
    }
  }

  TEST_CASE("fewer than four values is a parameter error") {
    const std::vector<double> v{1, 2, 3};
    CHECK_THROWS_AS(tukey_reject(v), Error);
  }

  TEST_CASE("EMS followed by a tap 400 ms later is rejected") {
    Rng rng(72);
    TrialTable t = latency_table(rng, 20);
    for (auto& r : t) {
      r.condition = Condition::involuntary;
      r.ems_s = r.tap_s - 0.15;
    }
    t[4].ems_s = t[4].tap_s - 0.4;
    const auto s = screen_trials(t);
    CHECK_FALSE(s[4].kept);
    CHECK(s[4].reason.find("ems_no_tap") != std::string::npos);
  }

  TEST_CASE("a 30 s tap latency among 2-3 s trials is rejected") {
    Rng rng(73);
    TrialTable t = latency_table(rng, 30);
    t[7].tap_s = t[7].fixation_offset_s + 30.0;
    const auto s = screen_trials(t);
    CHECK_FALSE(s[7].kept);
    CHECK(s[7].reason == "tap_latency");
    CHECK(std::count_if(s.begin(), s.end(), [](const TrialRow& r) { return !r.kept; }) == 1);
  }

  TEST_CASE("clean generated tables lose nothing and screening is idempotent") {
    for (Condition c : {Condition::intention, Condition::involuntary}) {
      const auto session = generate_session(testing::small_config(74, 75), c);
      const auto once = screen_trials(trial_table(session.truth));
      CHECK(std::all_of(once.begin(), once.end(), [](const TrialRow& r) { return r.kept; }));
      const auto twice = screen_trials(once);
      for (std::size_t i = 0; i < once.size(); ++i) CHECK(once[i].kept == twice[i].kept);
    }
    Rng rng(75);
    TrialTable t = latency_table(rng, 30);
    t[2].tap_s += 40.0;
    t[9].estimate_ms = 5000.0;
    const auto a = screen_trials(t);
    const auto b = screen_trials(a);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].kept == b[i].kept);
      CHECK(a[i].reason == b[i].reason);
    }
  }

  TEST_CASE("trial table from markers matches the ground truth") {
    const auto s = generate_session(testing::small_config(76, 8), Condition::involuntary);
    const auto from_markers = trial_table(s.recording.markers, Condition::involuntary);
    const auto from_truth = trial_table(s.truth);
    REQUIRE(from_markers.size() == from_truth.size());
    for (std::size_t i = 0; i < from_truth.size(); ++i) {
      CHECK(from_markers[i].tap_s == doctest::Approx(from_truth[i].tap_s));
      CHECK(from_markers[i].ems_s == doctest::Approx(from_truth[i].ems_s));
      CHECK(from_markers[i].estimate_ms == from_truth[i].estimate_ms);
      CHECK(from_markers[i].tone_delay_ms == from_truth[i].tone_delay_ms);
    }
  }

  TEST_CASE("binding delta is estimate minus delay") {
    CHECK(row(0, 2.0, 250.0, 350.0).delta_ms() == -100.0);
  }

  TEST_CASE("binding summary groups conditions and warns on empty ones") {
    TrialTable t;
    for (int i = 0; i < 4; ++i) t.push_back(row(i, 2.5, 250.0, 350.0));
    for (int i = 0; i < 4; ++i) {
      TrialRow r = row(10 + i, 2.5, 300.0, 350.0);
      r.condition = Condition::augmented;
      if (i < 2) r.ems_s = r.tap_s - 0.1;
      t.push_back(r);
    }
    const auto s = binding_summary(t);
    REQUIRE(s.find("intention"));
    CHECK(s.find("intention")->mean_ms == -100.0);
    CHECK(s.find("intention")->n == 4);
    REQUIRE(s.find("augmented/ems"));
    CHECK(s.find("augmented/ems")->n == 2);
    CHECK(s.find("augmented/self")->mean_ms == -50.0);
    CHECK(s.find("involuntary") == nullptr);

    for (auto& r : t) {
      if (r.condition == Condition::augmented) r.kept = false;
    }
    const auto empty = binding_summary(t);
    CHECK(empty.find("augmented") == nullptr);
    CHECK(empty.warnings.size() == 3);
  }

  TEST_CASE("zero-bias generator gives binding means near zero") {
    SynthConfig c = testing::small_config(77, 75);
    c.behavior.bias_ms = {0.0, 0.0, 0.0};
    const auto s = generate_session(c, Condition::intention);
    const auto summary = binding_summary(screen_trials(trial_table(s.truth)));
    REQUIRE(summary.find("intention"));
    CHECK(std::abs(summary.find("intention")->mean_ms) < 40.0);
  }

  TEST_CASE("post-onset negativity is recovered at FCz") {
    SynthConfig c = testing::small_config(78, 75);
    c.noise.rms_uv = 2.0;
    const auto s = generate_session(c, Condition::involuntary);
    const Erp erp = erp_extract(s.recording, s.truth.onsets(), "FCz");
    CHECK(erp.mean.size() == 375);
    CHECK(erp.count() == 75);
    Eigen::Index best = 0;
    double value = 1e300;
    for (Eigen::Index i = 0; i < erp.mean.size(); ++i) {
      if (erp.times_ms[static_cast<std::size_t>(i)] >= 0.0 && erp.mean(i) < value) {
        value = erp.mean(i);
        best = i;
      }
    }
    CHECK(value == doctest::Approx(-10.0).epsilon(0.1));
    CHECK(std::abs(erp.times_ms[static_cast<std::size_t>(best)] - 210.0) <= 20.0);
  }

  TEST_CASE("averaged noise shrinks as one over root n") {
    Rng rng(79);
    const Recording r = white_recording(rng, 800.0);
    std::vector<double> onsets;
    for (int i = 0; i < 256; ++i) onsets.push_back(3.0 + 3.0 * i);
    // Mean power of the average over disjoint groups of n trials.
    auto power = [&](std::size_t n) {
      double sum = 0.0;
      for (std::size_t g = 0; g + n <= onsets.size(); g += n) {
        const double v = rms(erp_extract(r, std::span<const double>(onsets).subspan(g, n), "FCz").mean);
        sum += v * v;
      }
      return sum / static_cast<double>(onsets.size() / n);
    };
    const double ratio = std::sqrt(power(8) / power(32));
    CHECK(ratio > 1.7);
    CHECK(ratio < 2.3);
  }

  TEST_CASE("no epoch fits: empty-condition error") {
    Rng rng(80);
    const Recording r = white_recording(rng, 5.0);
    const std::vector<double> onsets{0.2, 4.9};
    try {
      (void)erp_extract(r, onsets, "FCz");
      FAIL("expected empty condition");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::empty_condition);
    }
  }

  TEST_CASE("sign-flip permutation p matches the exhaustive oracle") {
    Rng rng(81);
    for (int trial = 0; trial < 50; ++trial) {
      auto d = testing::random_vector(rng, 3 + rng.index(9));
      for (double& x : d) x += 0.5;
      CHECK(paired_permutation_p(d) == doctest::Approx(oracle::sign_flip_p(d)).epsilon(1e-12));
      CHECK(t_statistic(d) == doctest::Approx(oracle::t_stat(d)).epsilon(1e-12));
    }
  }

  TEST_CASE("Benjamini-Hochberg matches its definition") {
    const std::vector<double> p{0.01, 0.02, 0.04, 0.8};
    // 0.04 exceeds its step-up bound 3/4 * 0.05, so only the first two pass.
    CHECK(stats::bh_reject(p, 0.05) == std::vector<bool>{true, true, false, false});
    CHECK(stats::bh_adjust(p)[2] == doctest::Approx(0.04 * 4.0 / 3.0));
    Rng rng(82);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> q(1 + rng.index(30));
      for (double& x : q) x = rng.uniform() < 0.3 ? rng.uniform(0.0, 0.01) : rng.uniform();
      const auto got = stats::bh_adjust(q);
      const auto ref = oracle::bh(q);
      for (std::size_t i = 0; i < q.size(); ++i) CHECK(got[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("identical conditions give corrected p of one") {
    Rng rng(83);
    Matrix a(8, 50);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.normal();
    std::vector<double> times;
    for (int i = 0; i < 50; ++i) times.push_back(100.0 + 4.0 * i);
    const auto r = contrast(a, a, times);
    for (double p : r.p_adjusted) CHECK(p == 1.0);
    CHECK(r.window_p == 1.0);
  }

  TEST_CASE("a 5 uV window difference is detected in at least 95 of 100 cohorts") {
    std::vector<double> times;
    for (int i = 0; i < 375; ++i) times.push_back(-1000.0 + 4.0 * i);
    int hits = 0;
    for (int rep = 0; rep < 100; ++rep) {
      Rng rng(9000 + static_cast<std::uint64_t>(rep));
      Matrix a(10, 375), b(10, 375);
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        a(i) = rng.normal();
        b(i) = rng.normal();
      }
      for (Eigen::Index c = 0; c < 375; ++c) {
        if (times[static_cast<std::size_t>(c)] >= 150.0 && times[static_cast<std::size_t>(c)] < 250.0) {
          a.col(c).array() -= 5.0;
        }
      }
      hits += contrast(a, b, times).window_p < 0.01 ? 1 : 0;
    }
    CHECK(hits >= 95);
  }

  TEST_CASE("contrast needs matched participants") {
    Matrix a = Matrix::Zero(6, 10), b = Matrix::Zero(5, 10);
    std::vector<double> times(10, 0.0);
    for (int i = 0; i < 10; ++i) times[static_cast<std::size_t>(i)] = 4.0 * i;
    CHECK_THROWS_AS(contrast(a, b, times), Error);
    Matrix c = Matrix::Zero(4, 10);
    CHECK_THROWS_AS(contrast(c, c, times), Error);
  }

  TEST_CASE("noise-free held-out report is perfect") {
    SynthConfig c = testing::small_config(84, 40);
    c.noise_free();
    const auto train = generate_session(c, Condition::intention);
    const auto model = train_from_recording(train.recording).model;
    c.seed = 85;
    const auto test = generate_session(c, Condition::intention);
    const auto r = classifier_report("s", model, test.recording, test.truth);
    CHECK(r.heldout_f1 == 1.0);
    CHECK(r.heldout_fpr == 0.0);
    CHECK(r.heldout_segments == 80);
    CHECK(r.ticks > 0);
  }

  TEST_CASE("report csv has one tidy row per metric") {
    testing::TempDir dir("report");
    SessionReport r;
    r.session = "p01";
    r.cv_f1 = 0.7;
    write_report_csv(dir / "report.csv", {r});
    std::ifstream in(dir / "report.csv");
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(all.find("session,metric,value\n") != std::string::npos);
    CHECK(all.find("p01,cv_f1,0.7\n") != std::string::npos);
    CHECK(all.find("p01,pulse_error_mean_ms,") != std::string::npos);
  }
}
