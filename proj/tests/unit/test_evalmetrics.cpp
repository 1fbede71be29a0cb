#include <cmath>
#include <fstream>

#include <doctest.h>
#include <json.hpp>

#include "published_intervals.hpp"
#include "radfuse/common.hpp"
#include "radfuse/evalmetrics.hpp"
#include "test_util.hpp"

using namespace radfuse;

namespace {

ConfusionMatrix cm_of(std::array<std::array<std::uint64_t, 3>, 3> counts) {
  ConfusionMatrix cm;
  cm.counts = counts;
  return cm;
}

}  // namespace

TEST_SUITE("evalmetrics") {
  TEST_CASE("confusion matrix counting") {
    const std::vector<ClassLabel> t{ClassLabel::covid, ClassLabel::normal, ClassLabel::pneumonia};
    const std::vector<ClassLabel> p{ClassLabel::covid, ClassLabel::pneumonia, ClassLabel::pneumonia};
    const auto cm = confusion_matrix(t, p);
    CHECK(cm == cm_of({{{1, 0, 0}, {0, 0, 1}, {0, 0, 1}}}));
    CHECK(cm.total() == 3);
    CHECK(confusion_matrix(t, t) == cm_of({{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}));
    const std::vector<ClassLabel> all_covid(3, ClassLabel::covid);
    const auto col = confusion_matrix(t, all_covid);
    CHECK(col.col_sum(0) == 3);
    CHECK(col.col_sum(1) == 0);
    CHECK_THROWS_AS(confusion_matrix(t, std::vector<ClassLabel>(2)), Error);
    const std::vector<int> ti{0, 1, 3}, pi{0, 1, 2};
    CHECK_THROWS_AS(confusion_matrix(ti, pi), Error);
  }

  TEST_CASE("macro metrics") {
    const auto diag = macro_metrics(cm_of({{{5, 0, 0}, {0, 3, 0}, {0, 0, 2}}}));
    CHECK(diag.accuracy == 1.0);
    CHECK(diag.f1 == 1.0);
    CHECK(diag.warnings.empty());

    const auto m = macro_metrics(cm_of({{{1, 0, 0}, {0, 0, 1}, {0, 0, 1}}}));
    CHECK(m.accuracy == doctest::Approx(2.0 / 3));
    CHECK(m.per_class[1].precision == 0.0);
    CHECK(m.per_class[1].f1 == 0.0);
    CHECK(m.per_class[2].precision == 0.5);
    CHECK(m.per_class[2].f1 == doctest::Approx(2.0 / 3));
    CHECK_FALSE(m.warnings.empty());
    CHECK(m.f1 == doctest::Approx((1.0 + 0.0 + 2.0 / 3) / 3));

    const auto a = cm_of({{{7, 2, 1}, {0, 9, 3}, {2, 1, 8}}});
    ConfusionMatrix b;
    const int perm[3] = {2, 0, 1};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) b.counts[perm[i]][perm[j]] = a.counts[i][j];
    }
    const auto ma = macro_metrics(a), mb = macro_metrics(b);
    CHECK(ma.accuracy == mb.accuracy);
    CHECK(ma.f1 == doctest::Approx(mb.f1));
    for (int i = 0; i < 3; ++i) CHECK(ma.per_class[i].recall == mb.per_class[perm[i]].recall);
    CHECK_THROWS_AS(macro_metrics(ConfusionMatrix{}), Error);
  }

  TEST_CASE("confidence interval formula") {
    CHECK(confidence_interval(0.963, 1029) == doctest::Approx(0.0115).epsilon(0.01));
    CHECK(confidence_interval(0.940, 1029) == doctest::Approx(0.0145).epsilon(0.01));
    CHECK(confidence_interval(1.0, 50) == 0.0);
    CHECK(confidence_interval(0.3, 100) == doctest::Approx(confidence_interval(0.7, 100)));
    CHECK(confidence_interval(0.5, 100) > confidence_interval(0.49, 100));
    CHECK_THROWS_AS(confidence_interval(1.2, 10), Error);
    CHECK_THROWS_AS(confidence_interval(0.5, 0), Error);
  }

  TEST_CASE("published half-widths are reproduced") {
    for (const auto& row : fixtures::kPublishedIntervals) {
      INFO(row.row);
      const double ci = std::round(confidence_interval(row.metric, fixtures::kPublishedTestSize) * 1000) / 1000;
      CHECK(std::abs(ci - row.half_width) <= 0.001 + 1e-12);
    }
  }

  TEST_CASE("covid rates") {
    const auto zero = covid_rates(cm_of({{{4, 0, 0}, {0, 4, 0}, {0, 0, 4}}}));
    CHECK(zero.false_negative_rate == 0.0);
    CHECK(zero.false_positive_rate == 0.0);
    const auto one = covid_rates(cm_of({{{243, 1, 0}, {0, 392, 0}, {0, 0, 393}}}));
    CHECK(*one.false_negative_rate * 100 == doctest::Approx(0.41).epsilon(0.01));
    CHECK(one.false_positive_rate == 0.0);
    const auto all_wrong = covid_rates(cm_of({{{0, 3, 2}, {0, 4, 0}, {0, 0, 4}}}));
    CHECK(all_wrong.false_negative_rate == 1.0);
    const auto none = covid_rates(cm_of({{{0, 0, 0}, {1, 4, 0}, {0, 0, 4}}}));
    CHECK_FALSE(none.false_negative_rate.has_value());
    CHECK(*none.false_positive_rate == doctest::Approx(1.0 / 9));
  }

  TEST_CASE("report outputs") {
    const auto perfect = make_report("toy", cm_of({{{3, 0, 0}, {0, 3, 0}, {0, 0, 3}}}));
    CHECK(perfect.metrics.accuracy == 1.0);
    CHECK(perfect.accuracy_ci == 0.0);
    CHECK(perfect.n_test == 9);
    const auto j = nlohmann::json::parse(report_json(perfect));
    CHECK(j.at("accuracy") == 1.0);
    CHECK(j.at("n_test") == 9);
    CHECK(j.contains("covid_false_negative_rate"));
    CHECK(j.contains("covid_false_positive_rate"));

    const auto other = make_report("second", cm_of({{{2, 1, 0}, {0, 3, 0}, {0, 1, 2}}}));
    const std::vector<EvalReport> both{perfect, other};
    const auto table = format_table(both);
    CHECK(table.find("toy") != std::string::npos);
    CHECK(table.find("second") != std::string::npos);
    CHECK(table.find("1.000 ± 0.000") != std::string::npos);

    CHECK(confusion_csv(other.confusion) ==
          "true\\predicted,covid,normal,pneumonia\ncovid,2,1,0\nnormal,0,3,0\npneumonia,0,1,2\n");

    testutil::TempDir dir("eval");
    write_confusion_png(other.confusion, dir / "cm.png");
    std::ifstream png(dir / "cm.png", std::ios::binary);
    char magic[4] = {};
    png.read(magic, 4);
    CHECK(std::string(magic + 1, 3) == "PNG");
  }
}
