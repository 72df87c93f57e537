#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "ampsize/ampsize.h"

namespace {

const char* kDivider = R"(* divider
.param r1 1k 10k log
VDD vdd 0 1.0
IIN 0 out 0
R1 vdd out {r1}
R2 out 0 1k
.end
)";

TEST(CApi, NetlistLifecycle) {
  ampsize_netlist* n = nullptr;
  ASSERT_EQ(ampsize_netlist_parse(kDivider, &n), AMPSIZE_OK) << ampsize_last_error();
  size_t count = 0;
  ASSERT_EQ(ampsize_netlist_param_count(n, &count), AMPSIZE_OK);
  EXPECT_EQ(count, 1u);
  char* name = nullptr;
  ASSERT_EQ(ampsize_netlist_param_name(n, 0, &name), AMPSIZE_OK);
  EXPECT_STREQ(name, "r1");
  ampsize_string_free(name);
  EXPECT_EQ(ampsize_netlist_param_name(n, 1, &name), AMPSIZE_E_INVALID_ARGUMENT);

  char* text = nullptr;
  ASSERT_EQ(ampsize_netlist_serialize(n, &text), AMPSIZE_OK);
  ampsize_netlist* again = nullptr;
  EXPECT_EQ(ampsize_netlist_parse(text, &again), AMPSIZE_OK);
  ampsize_string_free(text);
  ampsize_netlist_free(again);

  ampsize_metrics m;
  const double x = 1000.0;
  ASSERT_EQ(ampsize_simulate(n, &x, 1, "IIN", "out", &m), AMPSIZE_OK) << ampsize_last_error();
  EXPECT_EQ(m.valid, 1);
  EXPECT_NEAR(m.gain, 500.0, 1e-6);  // 1k || 1k
  const double outside = 50.0;
  EXPECT_EQ(ampsize_simulate(n, &outside, 1, "IIN", "out", &m), AMPSIZE_E_CIRCUIT);
  EXPECT_NE(std::string(ampsize_last_error()).find("r1"), std::string::npos);
  EXPECT_EQ(ampsize_simulate(n, &x, 2, "IIN", "out", &m), AMPSIZE_E_INVALID_ARGUMENT);
  ampsize_netlist_free(n);
}

TEST(CApi, ParseErrorsCarryLocation) {
  ampsize_netlist* n = nullptr;
  EXPECT_EQ(ampsize_netlist_parse("* t\nR1 a 0 1k\nR1 a 0 2k\n.end\n", &n), AMPSIZE_E_PARSE);
  EXPECT_EQ(n, nullptr);
  EXPECT_NE(std::string(ampsize_last_error()).find("3"), std::string::npos);
  EXPECT_EQ(ampsize_netlist_parse(nullptr, &n), AMPSIZE_E_INVALID_ARGUMENT);
}

TEST(CApi, Benchmarks) {
  size_t count = 0;
  ASSERT_EQ(ampsize_benchmark_count(&count), AMPSIZE_OK);
  ASSERT_EQ(count, 2u);
  for (size_t i = 0; i < count; ++i) {
    char* name = nullptr;
    ASSERT_EQ(ampsize_benchmark_name(i, &name), AMPSIZE_OK);
    size_t dim = 0;
    ASSERT_EQ(ampsize_benchmark_dimension(name, &dim), AMPSIZE_OK);
    std::vector<double> x(dim, 0.0);
    ampsize_metrics m;
    double d = 0.0;
    int sat = -1;
    ASSERT_EQ(ampsize_benchmark_evaluate(name, x.data(), dim, &m, &d, &sat), AMPSIZE_OK) << ampsize_last_error();
    EXPECT_EQ(m.valid, 1);
    EXPECT_TRUE(sat == 0 || sat == 1);
    EXPECT_EQ(ampsize_benchmark_evaluate(name, x.data(), dim - 1, &m, &d, &sat), AMPSIZE_E_INVALID_ARGUMENT);
    ampsize_string_free(name);
  }
  size_t dim = 0;
  EXPECT_EQ(ampsize_benchmark_dimension("nope", &dim), AMPSIZE_E_CONFIG);
}

TEST(CApi, ConfigAndRun) {
  ampsize_config* c = nullptr;
  EXPECT_EQ(ampsize_config_parse("{not json", &c), AMPSIZE_E_PARSE);
  EXPECT_EQ(ampsize_config_parse(R"({"schema_version": 1, "benchmark": "tia2", "optimizer": "x"})", &c),
            AMPSIZE_E_CONFIG);
  EXPECT_EQ(ampsize_config_load("/nonexistent/config.json", &c), AMPSIZE_E_CONFIG);
  ASSERT_EQ(ampsize_config_parse(R"({"schema_version": 1, "benchmark": "tia2", "optimizer": "random", "budget": 5})",
                                 &c),
            AMPSIZE_OK);
  const auto dir = std::filesystem::temp_directory_path() / "ampsize_capi_run";
  std::filesystem::remove_all(dir);
  ASSERT_EQ(ampsize_config_set_output_dir(c, dir.string().c_str()), AMPSIZE_OK);
  const uint64_t seeds[] = {3, 4};
  ASSERT_EQ(ampsize_config_set_seeds(c, seeds, 2), AMPSIZE_OK);
  char* summary = nullptr;
  ASSERT_EQ(ampsize_run(c, &summary), AMPSIZE_OK) << ampsize_last_error();
  EXPECT_NE(std::string(summary).find("\"per_seed\""), std::string::npos);
  ampsize_string_free(summary);
  EXPECT_TRUE(std::filesystem::exists(dir / "seed_4" / "trace.csv"));

  const std::string path = dir.string();
  const char* paths[] = {path.c_str()};
  char* table = nullptr;
  ASSERT_EQ(ampsize_table(paths, 1, AMPSIZE_TABLE_MARKDOWN, &table), AMPSIZE_OK) << ampsize_last_error();
  EXPECT_NE(std::string(table).find("random"), std::string::npos);
  ampsize_string_free(table);
  const char* missing[] = {"/nonexistent/summary.json"};
  EXPECT_EQ(ampsize_table(missing, 1, AMPSIZE_TABLE_CSV, &table), AMPSIZE_E_IO);
  ampsize_config_free(c);
  std::filesystem::remove_all(dir);
}

TEST(CApi, Selfcheck) {
  int ok = 0;
  char* report = nullptr;
  ASSERT_EQ(ampsize_selfcheck(&ok, &report), AMPSIZE_OK);
  EXPECT_EQ(ok, 1) << report;
  ampsize_string_free(report);
  EXPECT_STRNE(ampsize_version(), "");
}

}  // namespace
