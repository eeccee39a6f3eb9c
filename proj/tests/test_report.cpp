#include <gtest/gtest.h>

#include <random>

#include "hidbench/report.hpp"
#include "support.hpp"

using namespace hidbench;
using namespace hidbench::report;

namespace {

std::vector<MetricsRow> published() {
  return parse_metrics_csv(text::read_file(testsupport::source_path("tests/data/main_results.csv")), "main_results");
}

std::size_t parse_error_line(const std::string& csv, std::string* msg = nullptr) {
  try {
    parse_metrics_csv(csv, "m.csv");
  } catch (const ParseError& e) {
    if (msg) *msg = e.what();
    return e.line();
  }
  ADD_FAILURE() << "no ParseError for " << csv;
  return 999;
}

std::vector<std::string> lines_of(const std::string& s) {
  auto v = text::split_lines(s);
  return {v.begin(), v.end()};
}

}  // namespace

TEST(MetricsCsv, RoundTripAtThreeDecimals) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<MetricsRow> rows;
  for (int i = 0; i < 50; ++i)
    rows.push_back({"model, \"v" + std::to_string(i % 5) + "\"", "ds" + std::to_string(i), u(rng), u(rng) * 2 - 1,
                    u(rng) * 5});
  auto back = parse_metrics_csv(metrics_csv(rows));
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].model, rows[i].model);
    EXPECT_EQ(back[i].dataset, rows[i].dataset);
    EXPECT_NEAR(back[i].precision, rows[i].precision, 5e-4 + 1e-12);
    EXPECT_NEAR(back[i].mcc, rows[i].mcc, 5e-4 + 1e-12);
    EXPECT_NEAR(back[i].fpr_percent, rows[i].fpr_percent, 5e-4 + 1e-12);
  }
  // Text is stable once values are on the three-decimal grid.
  EXPECT_EQ(metrics_csv(back), metrics_csv(parse_metrics_csv(metrics_csv(back))));
}

TEST(MetricsCsv, FromMetricSet) {
  auto row = make_row("m", "d", eval::compute_metrics({9, 3, 2, 28}));
  EXPECT_EQ(metrics_csv({row}), "model,dataset,precision,mcc,fpr_percent\nm,d,0.750,0.702,9.677\n");
}

TEST(MetricsCsv, SchemaErrorsNameTheColumn) {
  std::string msg;
  EXPECT_EQ(parse_error_line("model,dataset,precision,MCC,fpr_percent\n", &msg), 1u);
  EXPECT_NE(msg.find("'mcc'"), std::string::npos) << msg;
  EXPECT_NE(msg.find("'MCC'"), std::string::npos) << msg;
  EXPECT_EQ(parse_error_line("model,dataset,precision,mcc\n", &msg), 1u);
  EXPECT_NE(msg.find("fpr_percent"), std::string::npos) << msg;
  EXPECT_EQ(parse_error_line("model,dataset,precision,mcc,fpr_percent,recall\n", &msg), 1u);
  EXPECT_NE(msg.find("recall"), std::string::npos) << msg;
  EXPECT_EQ(parse_error_line("model,dataset,precision,mcc,fpr_percent\nm,d,0.5,x,1\n", &msg), 2u);
  EXPECT_NE(msg.find("'mcc'"), std::string::npos) << msg;
  EXPECT_EQ(parse_error_line("model,dataset,precision,mcc,fpr_percent\nm,d,0.5,0.1,1\nm,d,0.5\n", &msg), 3u);
  EXPECT_NE(msg.find("'mcc'"), std::string::npos) << msg;
  EXPECT_EQ(parse_error_line("model,dataset,precision,mcc,fpr_percent\n,d,1,1,1\n", &msg), 2u);
  EXPECT_NE(msg.find("'model'"), std::string::npos) << msg;
  EXPECT_EQ(parse_error_line(""), 1u);
  EXPECT_TRUE(parse_metrics_csv("model,dataset,precision,mcc,fpr_percent\n").empty());
}

TEST(Merge, SortsAndRejectsDuplicates) {
  std::vector<MetricsRow> a{{"b", "y", 1, 1, 0}, {"a", "z", 0, 0, 0}};
  std::vector<MetricsRow> b{{"a", "x", 0.5, 0.5, 0.5}};
  auto m = merge_metrics({a, b});
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m[0].dataset, "x");
  EXPECT_EQ(m[1].dataset, "z");
  EXPECT_EQ(m[2].model, "b");
  EXPECT_EQ(merge_metrics({b, a}), m);
  EXPECT_THROW(merge_metrics({a, a}), ConfigError);
  EXPECT_TRUE(merge_metrics({}).empty());
}

TEST(Regimes, NeedEveryDataset) {
  auto rows = published();
  ASSERT_EQ(rows.size(), 81u);
  auto rr = regimes(rows);
  ASSERT_EQ(rr.size(), 9u);
  std::map<std::string, eval::Regime> by;
  for (const auto& r : rr) by[r.model] = r.assignment.regime;
  EXPECT_EQ(by.at("Claude-opus-4.6"), eval::Regime::conservative);
  EXPECT_EQ(by.at("Gemini-2.5-Flash"), eval::Regime::over_sensitive);

  // Too few datasets: no regimes. A model missing one dataset is skipped.
  std::vector<MetricsRow> e3;
  for (const auto& r : rows)
    if (r.dataset.rfind("e3-", 0) == 0) e3.push_back(r);
  EXPECT_TRUE(regimes(e3).empty());
  EXPECT_EQ(regimes(e3, 3).size(), 9u);
  auto partial = rows;
  partial.erase(partial.begin());
  EXPECT_EQ(regimes(partial).size(), 8u);

  auto csv = regimes_csv(rr);
  EXPECT_NE(csv.find("Claude-opus-4.6,0.201,0.852,conservative"), std::string::npos) << csv;
}

TEST(Table, FullGridHasRegimeColumn) {
  auto table = render_table(published());
  auto lines = lines_of(table);
  ASSERT_EQ(lines.size(), 2u + 9u);
  EXPECT_NE(lines[0].find("e3-cadets"), std::string::npos);
  EXPECT_NE(lines[0].find("nl-win10"), std::string::npos);
  EXPECT_NE(lines[1].find("Pre"), std::string::npos);
  EXPECT_NE(lines[1].find("FPR(%)"), std::string::npos);
  EXPECT_NE(lines[1].find("Regime"), std::string::npos);
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const bool has = lines[i].find("conservative") != std::string::npos ||
                     lines[i].find("balanced") != std::string::npos ||
                     lines[i].find("over_sensitive") != std::string::npos;
    EXPECT_TRUE(has) << lines[i];
  }
}

TEST(Table, PartialGridHasNoRegimeColumn) {
  std::vector<MetricsRow> e3;
  for (const auto& r : published())
    if (r.dataset.rfind("e3-", 0) == 0) e3.push_back(r);
  auto lines = lines_of(render_table(e3));
  ASSERT_EQ(lines.size(), 11u);
  EXPECT_EQ(lines[1].find("Regime"), std::string::npos);
  // Nine Pre/MCC/FPR headers: three datasets.
  std::size_t n = 0;
  for (auto pos = lines[1].find("Pre"); pos != std::string::npos; pos = lines[1].find("Pre", pos + 1)) ++n;
  EXPECT_EQ(n, 3u);
  bool found = false;
  for (const auto& l : lines)
    if (l.rfind("GPT-4.1", 0) == 0) {
      found = true;
      EXPECT_NE(l.find("1.000"), std::string::npos);
      EXPECT_NE(l.find("0.534"), std::string::npos);
    }
  EXPECT_TRUE(found);
  // Missing cells are dashes.
  e3.pop_back();
  EXPECT_NE(render_table(e3).find(" -"), std::string::npos);
}

TEST(Costs, CsvAndTable) {
  eval::CostRow r{"claude-opus-4.6", "dropper-sample", 4, 100, 50, llm::Money::parse("0.069785"), 12.5};
  auto csv = costs_csv({r});
  EXPECT_NE(csv.find("claude-opus-4.6,dropper-sample,4,100,50,0.069785,0.01744625,12.500,3.125"), std::string::npos)
      << csv;
  auto t = render_cost_table({r});
  EXPECT_NE(t.find("Cost/File ($)"), std::string::npos);
  EXPECT_NE(t.find("0.069785"), std::string::npos);
  EXPECT_NE(t.find("12.50"), std::string::npos);
}
