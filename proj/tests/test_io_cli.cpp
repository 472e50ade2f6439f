#include "metapot/cli.hpp"
#include "metapot/error.hpp"
#include "metapot/format.hpp"
#include "metapot/io.hpp"
#include "metapot/trace_collapse.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace metapot;
namespace fs = std::filesystem;

namespace {

const std::string kData = METAPOT_DATA_DIR;

std::string data(const std::string& name) { return kData + "/" + name; }

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("metapot_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("number formatting") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(6.0 / 5.0) == "1.2");
  CHECK(format_number(1e-20) == "1e-20");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("chain spec parsing") {
  const io::ChainSpec spec = io::load_chain_spec(data("two_state.yaml"));
  CHECK(spec.space.labels() == std::vector<std::string>{"1", "2"});
  CHECK(spec.rates.rate(0, 1) == 2.0);
  CHECK(spec.rates.rate(1, 0) == 3.0);

  try {
    io::parse_chain_spec("states: [a, b]\nrates:\n  - [a, b, 1.0]\n  - [b, a, oops]\n");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  CHECK(code_of([] { io::parse_chain_spec("states: [a, b\n"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { io::parse_chain_spec("states: [a, b]\n"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { io::parse_chain_spec("states: [a, a]\nrates: []\n"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { io::parse_chain_spec("states: [a, b]\nrates:\n  - [a, c, 1.0]\n"); }) == ErrorCode::UnknownLabel);
  CHECK(code_of([] { io::load_chain_spec("/nonexistent/file.yaml"); }) == ErrorCode::ParseError);
}

TEST_CASE("chain spec round trip") {
  const ChainModel chain = io::load_chain(data("four_state.yaml"));
  const io::ChainSpec back = io::parse_chain_spec(io::emit_chain_spec(chain));
  CHECK(back.space.labels() == chain.space().labels());
  CHECK((DenseMatrix(back.rates.off_diagonal()) - DenseMatrix(chain.rates().off_diagonal())).cwiseAbs().maxCoeff() == 0.0);

  const CollapsedChain c = collapse(chain, {2, 3});
  const io::ChainSpec cback = io::parse_chain_spec(io::emit_chain_spec(c.chain));
  CHECK(cback.space.labels().back() == "#collapsed");
}

TEST_CASE("birth-death config parsing") {
  const io::BDFile f = io::load_bd_config(data("bd_two_wells.yaml"));
  CHECK(f.config.a == 0.0);
  CHECK(f.config.b == 1.0);
  REQUIRE(f.config.wells.size() == 2);
  CHECK(f.config.wells[0].radius == doctest::Approx(0.25));
  CHECK(f.config.h(0.3) == doctest::Approx(0.0025));
  CHECK(f.config.phi(0.3) == 1.0);
  CHECK(f.n_grid == std::vector<int>{250, 500, 1000, 2000, 4000});

  const io::BDFile g = io::parse_bd_config(
      "interval: [0, 2]\n"
      "wells: [{position: 0.5, exponent: 3}, {position: 1.5, exponent: 3, radius: 0.2}]\n"
      "H: {kind: piecewise-power}\n"
      "Phi: {kind: polynomial, coefficients: [1, 0.5]}\n"
      "window: {kind: fixed, value: 4}\n");
  CHECK(g.config.wells[1].radius == 0.2);
  CHECK(g.config.phi(2.0) == 2.0);
  CHECK(g.config.window(100) == 4);
  CHECK(g.n_grid.size() == 5);

  CHECK(code_of([] { io::parse_bd_config("interval: [0, 1]\nwells: []\nH: {kind: cubic}\nPhi: {kind: constant, value: 1}\n"); }) ==
        ErrorCode::ParseError);
}

TEST_CASE("label sets") {
  const StateSpace s({"a", "b", "c"});
  CHECK(io::parse_set(s, "c, a") == StateSet{0, 2});
  CHECK(code_of([&] { io::parse_set(s, "a,zz"); }) == ErrorCode::UnknownLabel);
}

TEST_CASE("cli validate") {
  const Run ok = run({"validate", "--input", data("two_state.yaml")});
  CHECK(ok.code == cli::kOk);
  CHECK(ok.out == "valid\n");
  const Run bad = run({"validate", "--input", data("negative_rate.yaml")});
  CHECK(bad.code == cli::kCheckFailed);
  CHECK(bad.out.find("negative") != std::string::npos);
  const fs::path dir = scratch("validate");
  std::ofstream(dir / "broken.yaml") << "states: [1, 2\n";
  CHECK(run({"validate", "--input", (dir / "broken.yaml").string()}).code == cli::kUsage);
  CHECK(run({"validate"}).code == cli::kUsage);
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"--help"}).code == cli::kOk);
}

TEST_CASE("cli analyze") {
  const Run r = run({"analyze", "--input", data("two_state.yaml"), "--A", "1", "--B", "2"});
  REQUIRE(r.code == cli::kOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["capacity"]["capacity"].get<double>() == doctest::Approx(1.2).epsilon(1e-14));
  CHECK(j["checks_passed"].get<bool>());
  CHECK_FALSE(j.contains("three_set"));

  const Run three = run({"analyze", "--input", data("four_state.yaml"), "--A", "a0", "--B", "a1", "--C", "b,c"});
  REQUIRE(three.code == cli::kOk);
  CHECK(nlohmann::json::parse(three.out).contains("three_set"));
  CHECK(nlohmann::json::parse(three.out)["three_set"]["covers_space"].get<bool>());

  // a0, b, c leave a1 out: the plain form misses, the trace form is checked
  const Run partial = run({"analyze", "--input", data("four_state.yaml"), "--A", "a0", "--B", "b", "--C", "c"});
  REQUIRE(partial.code == cli::kOk);
  const auto ts = nlohmann::json::parse(partial.out)["three_set"];
  CHECK_FALSE(ts["covers_space"].get<bool>());
  CHECK(ts["trace_relative_residual"].get<double>() <= 1e-10);
  CHECK(ts["relative_residual"].get<double>() > 1e-6);

  const Run missing = run({"analyze", "--input", data("two_state.yaml"), "--A", "1", "--B", "7"});
  CHECK(missing.code == cli::kUsage);
  CHECK(missing.err.find("UnknownLabel") != std::string::npos);
  CHECK(missing.err.find("UnknownLabel") == missing.err.rfind("UnknownLabel"));
  CHECK(missing.err.find("7") != std::string::npos);

  const fs::path dir = scratch("analyze");
  const Run csv = run({"analyze", "--input", data("three_cycle.yaml"), "--A", "1", "--B", "2", "--format", "csv", "--out",
                       dir.string()});
  CHECK(csv.code == cli::kOk);
  const std::string text = io::read_file((dir / "analyze.csv").string());
  CHECK(text.rfind("quantity,state,value\n", 0) == 0);
  CHECK(text.find("capacity,,0.33333333333333") != std::string::npos);
  CHECK(text.find("symmetric_capacity,,0.25") != std::string::npos);
}

TEST_CASE("cli saddle") {
  const Run r = run({"saddle", "--input", data("four_state.yaml"), "--A0", "a0", "--A1", "a1", "--B", "b,c"});
  REQUIRE(r.code == cli::kOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(std::abs(j["h_on_B"].get<double>() - j["rate_ratio"].get<double>()) <= 1e-8);
  CHECK_FALSE(j["reversible"].get<bool>());

  const Run rev = run({"saddle", "--input", data("path_reversible.yaml"), "--A0", "1", "--A1", "5", "--B", "3"});
  REQUIRE(rev.code == cli::kOk);
  const auto jr = nlohmann::json::parse(rev.out);
  CHECK(jr["reversible"].get<bool>());
  CHECK(jr["f_equals_h"].get<bool>());

  const Run overlap = run({"saddle", "--input", data("four_state.yaml"), "--A0", "a0", "--A1", "a1", "--B", "a0,b"});
  CHECK(overlap.code == cli::kUsage);
  CHECK(overlap.err.find("Overlap") != std::string::npos);
}

TEST_CASE("cli bd") {
  const fs::path dir = scratch("bd");
  const Run r = run({"bd", "--input", data("bd_two_wells.yaml"), "--n-grid", "100,200", "--out", dir.string()});
  REQUIRE(r.code == cli::kOk);
  const std::string csv = io::read_file((dir / "bd_convergence.csv").string());
  CHECK(csv.find("limit_1_2") != std::string::npos);
  CHECK(csv.find("h1_1") != std::string::npos);
  const auto j = nlohmann::json::parse(io::read_file((dir / "bd_summary.json").string()));
  CHECK(j["limits"][0]["rate"].get<double>() == doctest::Approx(22.3785).epsilon(1e-5));
  CHECK(j.contains("h0"));
  CHECK(j.contains("h1"));
  CHECK(j.contains("h2"));

  std::ofstream(dir / "wide.yaml") << "interval: [0, 1]\n"
                                      "wells: [{position: 0.25, exponent: 2}, {position: 0.75, exponent: 2}]\n"
                                      "H: {kind: piecewise-power}\n"
                                      "Phi: {kind: constant, value: 1}\n"
                                      "window: {kind: power, scale: 0.4, exponent: 1}\n";
  const Run wide = run({"bd", "--input", (dir / "wide.yaml").string(), "--n-grid", "50"});
  CHECK(wide.code == cli::kUsage);
  CHECK(wide.err.find("WindowTooWide") != std::string::npos);
}

TEST_CASE("cli simulate") {
  const fs::path dir = scratch("simulate");
  const std::vector<std::string> args{"simulate", "--input", data("path_reversible.yaml"), "--start", "3", "--A", "1",
                                      "--B", "5", "--n", "20000", "--seed", "42"};
  const Run a = run(args);
  const Run b = run(args);
  REQUIRE(a.code == cli::kOk);
  CHECK(a.out == b.out);
  const auto j = nlohmann::json::parse(a.out);
  CHECK(j["exact"].get<double>() == doctest::Approx(0.5));
  CHECK(j.contains("z_score"));

  const Run t = run({"simulate", "--input", data("two_state.yaml"), "--start", "1", "--horizon", "5", "--seed", "3",
                     "--trajectory", (dir / "traj.csv").string()});
  REQUIRE(t.code == cli::kOk);
  const std::string csv = io::read_file((dir / "traj.csv").string());
  CHECK(csv.rfind("time,state\n0,1\n", 0) == 0);

  const Run zero = run({"simulate", "--input", data("two_state.yaml"), "--start", "1", "--B", "2", "--n", "0"});
  CHECK(zero.code == cli::kUsage);
  CHECK(zero.err.find("InvalidSampleCount") != std::string::npos);
}

TEST_CASE("cli trace and collapse round trip") {
  const fs::path dir = scratch("trace");
  const Run t = run({"trace", "--input", data("four_state.yaml"), "--F", "a0,a1,b"});
  REQUIRE(t.code == cli::kOk);
  const io::ChainSpec traced = io::parse_chain_spec(t.out);
  CHECK(traced.space.size() == 3);

  const Run c = run({"collapse", "--input", data("four_state.yaml"), "--B", "b,c", "--out", dir.string()});
  REQUIRE(c.code == cli::kOk);
  const std::string path = (dir / "collapse.yaml").string();
  const Run again = run({"analyze", "--input", path, "--A", "a0", "--B", "#collapsed"});
  CHECK(again.code == cli::kOk);
}
