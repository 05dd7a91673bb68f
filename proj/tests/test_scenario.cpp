#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "padicnn/scenario.hpp"

using namespace padicnn;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / "padicnn_tests" / (std::string(info->test_suite_name()) + "." + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string matrix_csv(int rows, int cols, int short_row = -1) {
  std::ostringstream os;
  for (int r = 0; r < rows; ++r) {
    const int n = r == short_row ? cols - 1 : cols;
    for (int c = 0; c < n; ++c) os << (c ? "," : "") << ((r + c) % 3) * 0.5;
    os << '\n';
  }
  return os.str();
}

std::map<std::string, std::string> read_golden() {
  std::ifstream in(std::string(PADICNN_TEST_DATA) + "/preset_golden.txt");
  std::map<std::string, std::string> out;
  std::string line, current;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      current = line.substr(1, line.size() - 2);
      continue;
    }
    out[current] += line + '\n';
  }
  return out;
}

const char* kMinimal = R"({
  "name": "tiny",
  "p": 3, "l": 2,
  "plan": {"t_end": 0.1}
})";

}  // namespace

TEST(Config, DefaultsApplied) {
  const auto c = parse_config(kMinimal);
  EXPECT_EQ(c.p, 3);
  EXPECT_EQ(c.alpha, 2.5);
  EXPECT_EQ(c.plan.dt, 1e-3);
  EXPECT_EQ(c.mode, NetworkMode::quantum);
  EXPECT_EQ(c.activation, ActivationKind::saturation);
  EXPECT_EQ(c.output.dir, "out/tiny");
  EXPECT_TRUE(std::holds_alternative<ZeroState>(c.initial));
}

TEST(Config, RoundTripsAllPresets) {
  for (const auto& name : preset_names()) {
    const auto c = make_preset(name, Horizon::paper);
    EXPECT_EQ(parse_config(save_config(c)), c) << name;
  }
  auto c = make_preset("sim4-1");
  c.output.states = "states.csv";
  c.output.heatmap.reset();
  c.activation = ActivationKind::paper_literal;
  c.w = CouplingConfig{CouplingVariant::matrix, {}, "w.csv", 0.25};
  c.z.terms.push_back(BiasTerm{0.3, 1.0 / 3.0, 0.1, 0.7, BallSpec{CellIndex(5), 3}, -0.2});
  EXPECT_EQ(parse_config(save_config(c)), c);
}

TEST(Config, RejectsUnknownKeys) {
  try {
    parse_config(R"({"p": 3, "l": 2, "plan": {"t_end": 1, "tend": 2}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("tend"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_config(R"({"p": 3, "l": 2, "plan": {"t_end": 1}, "beta": 1})"), ConfigError);
}

TEST(Config, RejectsCompositePrime) {
  try {
    parse_config(R"({"p": 4, "l": 2, "plan": {"t_end": 1}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("p must be prime"), std::string::npos) << e.what();
  }
}

TEST(Config, ParseErrorHasPosition) {
  try {
    parse_config("{\n  \"p\": 3,\n  \"l\": ,\n}", "bad.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json:3:"), std::string::npos) << e.what();
  }
}

TEST(Config, RejectsInvalidValues) {
  for (const char* text : {
           R"({"p": 3, "l": 2, "alpha": 1, "plan": {"t_end": 1}})",
           R"({"p": 3, "l": 2, "plan": {"t_end": -1}})",
           R"({"p": 3, "l": 2, "plan": {"t_end": 1, "snapshot_stride": 0}})",
           R"({"p": 3, "l": 2, "mode": "both", "plan": {"t_end": 1}})",
           R"({"p": 3, "l": 2, "initial": {"kind": "ball", "center": 4, "level": 3}, "plan": {"t_end": 1}})",
           R"({"p": 3, "l": 2, "Z": [{"amplitude": 1, "start": 5, "end": 2}], "plan": {"t_end": 1}})",
           R"({"p": 3, "l": 2, "W": {"variant": "constant"}, "plan": {"t_end": 1}})",
           R"({"p": 3, "l": 2, "p2": 1, "plan": {"t_end": 1}})",
           R"({"p": 3, "l": 2})",
       })
    EXPECT_THROW(parse_config(text), ConfigError) << text;
}

TEST(Config, MissingMatrixFileNamed) {
  TempDir dir;
  write_file(dir / "cfg.json", R"({"p": 2, "l": 6, "W": {"variant": "matrix", "path": "gone.csv"}, "plan": {"t_end": 1}})");
  try {
    load_config((dir / "cfg.json").string());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("gone.csv"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_config((dir / "nope.json").string()), ConfigError);
}

TEST(Config, RelativePathsResolveAgainstConfigDir) {
  TempDir dir;
  write_file(dir / "w.csv", matrix_csv(64, 64));
  write_file(dir / "cfg.json",
             R"({"name": "rel", "p": 2, "l": 6, "W": {"variant": "matrix", "path": "w.csv", "scale": 0.1},
                 "plan": {"t_end": 0.01, "snapshot_stride": 5}, "output": {"dir": "result"}})");
  const auto c = load_config((dir / "cfg.json").string());
  const auto r = run_scenario(c);
  EXPECT_EQ(r.exit_code, kExitOk) << r.message;
  EXPECT_EQ(r.coupling_provenance, "file:w.csv");
  EXPECT_TRUE(fs::exists(dir / "result" / "norms.csv"));
}

TEST(Ingest, AcceptsMatchingSize) {
  TempDir dir;
  write_file(dir / "w.csv", matrix_csv(64, 64));
  const auto m = ingest_matrix((dir / "w.csv").string(), GroupScheme(2, 6));
  EXPECT_EQ(m.matrix.rows(), 64);
  EXPECT_EQ(m.matrix(1, 2), Complex(0.0, 0.0));
  EXPECT_EQ(m.matrix(0, 1), Complex(0.5, 0.0));
  EXPECT_EQ(m.asymmetry, 0.0);
}

TEST(Ingest, RejectsWrongScheme) {
  TempDir dir;
  write_file(dir / "w.csv", matrix_csv(64, 64));
  try {
    ingest_matrix((dir / "w.csv").string(), GroupScheme(3, 6));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("729"), std::string::npos) << e.what();
  }
}

TEST(Ingest, ShortRowNamed) {
  TempDir dir;
  write_file(dir / "w.csv", matrix_csv(64, 64, 17));
  try {
    ingest_matrix((dir / "w.csv").string(), GroupScheme(2, 6));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("row 18"), std::string::npos) << e.what();
  }
}

TEST(Ingest, ReportsAsymmetry) {
  TempDir dir;
  std::ostringstream os;
  os << "0,1\n0,0\n";
  write_file(dir / "w.csv", os.str());
  EXPECT_EQ(ingest_matrix((dir / "w.csv").string(), GroupScheme(2, 1)).asymmetry, 1.0);
}

TEST(SyntheticCat, Structure) {
  const auto w = synthetic_cat_matrix();
  ASSERT_EQ(w.rows(), 64);
  EXPECT_LE((w - w.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(w.diagonal().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(w(0, 1).real(), 0.0);
  EXPECT_EQ(w(0, 2).real(), 1.0);
  EXPECT_EQ(w(0, 8).real(), 2.0);
  EXPECT_EQ(w(0, 32).real(), 3.0);
  EXPECT_EQ(w.imag().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Build, SyntheticCatNeedsBinaryScheme) {
  auto c = make_preset("sim3-2");
  c.p = 3;
  EXPECT_THROW(build_scenario(c), ConfigError);
  EXPECT_EQ(run_scenario(c).exit_code, kExitConfig);
}

TEST(Presets, MatchGoldenTable) {
  const auto golden = read_golden();
  ASSERT_EQ(golden.size(), preset_names().size());
  for (const auto& name : preset_names()) {
    ASSERT_TRUE(golden.count(name)) << name;
    EXPECT_EQ(effective_parameters(make_preset(name, Horizon::paper)), golden.at(name)) << name;
  }
}

TEST(Presets, DeskHorizonOnlyShortensTime) {
  for (const auto& name : preset_names()) {
    auto paper = make_preset(name, Horizon::paper);
    const auto desk = make_preset(name, Horizon::desk);
    EXPECT_LT(desk.plan.t_end, paper.plan.t_end) << name;
    paper.plan.t_end = desk.plan.t_end;
    EXPECT_EQ(paper, desk) << name;
  }
  EXPECT_THROW(make_preset("sim7"), ConfigError);
}

TEST(Presets, CatMatrixOverride) {
  const auto c = make_preset("sim4-2", Horizon::desk, "/data/cat.csv");
  EXPECT_EQ(c.w.path, "/data/cat.csv");
  EXPECT_EQ(c.w.scale, 0.1);
  EXPECT_NE(effective_parameters(c).find("W=0.1*W_cat[file:/data/cat.csv]"), std::string::npos);
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0), "1");
  const double x = 0.1234567890123456789;
  EXPECT_EQ(std::stod(format_number(x)), x);
  EXPECT_EQ(format_complex({0.5, 0.3}), "0.5+0.3i");
  EXPECT_EQ(format_complex({0.5, -0.3}), "0.5-0.3i");
}

TEST(Outputs, Sim1FieldAtTimeZero) {
  TempDir dir;
  auto c = make_preset("sim1");
  c.plan.t_end = 0.01;
  c.plan.snapshot_stride = 5;
  c.output.dir = dir.path().string();
  const auto r = run_scenario(c);
  ASSERT_EQ(r.exit_code, kExitOk) << r.message;

  std::ifstream field(dir / "field.csv");
  std::string header, row0;
  std::getline(field, header);
  std::getline(field, row0);
  EXPECT_EQ(header.substr(0, 16), "t,cell_0,cell_1,");
  EXPECT_EQ(header.substr(header.size() - 9), ",cell_728");

  std::vector<std::string> cells;
  std::stringstream ss(row0);
  for (std::string tok; std::getline(ss, tok, ',');) cells.push_back(tok);
  ASSERT_EQ(cells.size(), 730u);
  EXPECT_EQ(cells[0], "0");
  int nines = 0;
  for (std::size_t k = 1; k < cells.size(); ++k) {
    const std::uint32_t cell = static_cast<std::uint32_t>(k - 1);
    if (cell % 9 == 4) {
      EXPECT_EQ(std::stod(cells[k]), 9.0) << cell;
      ++nines;
    } else {
      EXPECT_EQ(cells[k], "0") << cell;
    }
  }
  EXPECT_EQ(nines, 81);

  const std::string norms = slurp(dir / "norms.csv");
  EXPECT_EQ(norms.substr(0, 10), "t,norm_sq\n");
  EXPECT_EQ(std::count(norms.begin(), norms.end(), '\n'), 12);
}

TEST(Outputs, EmptyTrajectoryWritesHeaders) {
  TempDir dir;
  auto c = make_preset("sim6-1");
  c.output.dir = dir.path().string();
  const auto res = emit_outputs(Trajectory{}, c, 64);
  EXPECT_EQ(slurp(dir / "norms.csv"), "t,norm_sq\n");
  const std::string field = slurp(dir / "field.csv");
  EXPECT_EQ(std::count(field.begin(), field.end(), '\n'), 1);
  EXPECT_FALSE(res.warnings.empty());
  EXPECT_FALSE(fs::exists(dir / "heatmap.pgm"));
}

TEST(Outputs, HeatmapLayoutAndScaling) {
  TempDir dir;
  Trajectory tr;
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXd d(4);
    d << 0.0, 1.0, 2.0, 4.0 * k;
    tr.snapshots.push_back({static_cast<double>(k), d, std::nullopt});
  }
  write_heatmap(dir / "h.pgm", tr);
  const std::string img = slurp(dir / "h.pgm");
  const std::string header = "P5\n4 3\n255\n";
  ASSERT_EQ(img.substr(0, header.size()), header);
  ASSERT_EQ(img.size(), header.size() + 12);
  const auto px = [&](int r, int c) { return static_cast<unsigned char>(img[header.size() + static_cast<std::size_t>(r * 4 + c)]); };
  EXPECT_EQ(px(0, 0), 0);
  EXPECT_EQ(px(2, 3), 255);
  EXPECT_EQ(px(1, 3), 128);
  EXPECT_EQ(px(0, 1), 32);
}

TEST(Outputs, HeatmapDegenerateCases) {
  TempDir dir;
  Trajectory constant, zero;
  for (int k = 0; k < 5; ++k) {
    constant.snapshots.push_back({k * 1.0, Eigen::VectorXd::Constant(8, 0.34), std::nullopt});
    zero.snapshots.push_back({k * 1.0, Eigen::VectorXd::Zero(8), std::nullopt});
  }
  write_heatmap(dir / "c.pgm", constant);
  write_heatmap(dir / "z.pgm", zero);
  const std::string header = "P5\n8 5\n255\n";
  const std::string c = slurp(dir / "c.pgm"), z = slurp(dir / "z.pgm");
  EXPECT_EQ(c, header + std::string(40, static_cast<char>(128)));
  EXPECT_EQ(z, header + std::string(40, '\0'));
}

TEST(Outputs, UnwritableDirectoryIsIoError) {
  TempDir dir;
  write_file(dir / "blocker", "x");
  auto c = make_preset("sim6-1");
  c.plan.t_end = 0.01;
  c.output.dir = (dir / "blocker" / "sub").string();
  const auto r = run_scenario(c);
  EXPECT_EQ(r.exit_code, kExitIo);
  EXPECT_NE(r.message.find("blocker"), std::string::npos) << r.message;
}

TEST(Run, ReproducibleBytes) {
  TempDir dir;
  auto c = make_preset("sim4-2");
  c.plan.t_end = 0.5;
  c.plan.snapshot_stride = 50;
  c.output.dir = (dir / "a").string();
  ASSERT_EQ(run_scenario(c).exit_code, kExitOk);
  c.output.dir = (dir / "b").string();
  ASSERT_EQ(run_scenario(c).exit_code, kExitOk);
  for (const char* f : {"norms.csv", "field.csv", "heatmap.pgm"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST(Run, ClassicalStaysReal) {
  TempDir dir;
  auto c = make_preset("sim6-1");
  c.plan.t_end = 4.0;
  c.output.dir = dir.path().string();
  c.output.states = "states.csv";
  const auto r = run_scenario(c);
  ASSERT_EQ(r.exit_code, kExitOk) << r.message;
  EXPECT_EQ(r.max_abs_imag, 0.0);
  EXPECT_GT(r.max_density, 0.0);

  std::ifstream states(dir / "states.csv");
  std::string header, line;
  std::getline(states, header);
  int rows = 0;
  while (std::getline(states, line)) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) cols.push_back(tok);
    ASSERT_EQ(cols.size(), 129u);
    for (std::size_t k = 65; k < cols.size(); ++k) ASSERT_EQ(std::stod(cols[k]), 0.0);
    ++rows;
  }
  EXPECT_EQ(rows, 41);
}

TEST(Run, ConstantBiasGrowsNorm) {
  TempDir dir;
  auto c = make_preset("sim3-1");
  c.plan.t_end = 0.5;
  c.output.dir = dir.path().string();
  ASSERT_EQ(run_scenario(c).exit_code, kExitOk);
  std::ifstream norms(dir / "norms.csv");
  std::string line;
  std::getline(norms, line);
  double prev = -1.0;
  int rows = 0;
  while (std::getline(norms, line)) {
    const double v = std::stod(line.substr(line.find(',') + 1));
    ASSERT_GT(v, prev);
    prev = v;
    ++rows;
  }
  EXPECT_EQ(rows, 501);
}

TEST(Run, BlowUpWritesPartialOutputWithMarker) {
  TempDir dir;
  ScenarioConfig c = parse_config(R"({"name": "boom", "p": 2, "l": 2, "mode": "classical", "activation": "identity",
      "W": {"variant": "constant", "value": 1e200}, "initial": {"kind": "uniform", "value": [1e100, 0]},
      "plan": {"t_end": 10, "dt": 0.01, "snapshot_stride": 1}})");
  c.output.dir = dir.path().string();
  const auto r = run_scenario(c);
  EXPECT_EQ(r.exit_code, kExitBlowUp);
  const std::string norms = slurp(dir / "norms.csv");
  EXPECT_NE(norms.find("# FAILED:"), std::string::npos);
  EXPECT_GT(std::count(norms.begin(), norms.end(), '\n'), 2);
}

TEST(Run, GraphOperatorFromEdgeList) {
  TempDir dir;
  write_file(dir / "edges.txt", "# path\n0 1\n");
  write_file(dir / "cfg.json", R"({"name": "ctqw", "p": 2, "l": 1, "operator": {"kind": "graph", "edges": "edges.txt"},
      "initial": {"kind": "ball", "center": 0, "level": 1}, "plan": {"t_end": 3.14159, "dt": 0.001, "snapshot_stride": 100},
      "output": {"dir": "o"}})");
  const auto c = load_config((dir / "cfg.json").string());
  const auto r = run_scenario(c);
  ASSERT_EQ(r.exit_code, kExitOk) << r.message;
  EXPECT_NEAR(r.final_norm_sq, 1.0, 1e-9);
}
