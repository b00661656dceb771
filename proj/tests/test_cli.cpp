#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <cstring>
#include <iomanip>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "wtvf/cli.hpp"
#include "wtvf/io.hpp"

using namespace wtvf;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("wtvf_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

json load_json(const std::string& path) {
  std::ifstream in(path);
  return json::parse(in);
}

std::vector<double> payload(const std::string& path) { return read_fst(path).series.values(); }

std::string simulate_small(const TempDir& dir) {
  const auto path = dir / "ring.fst";
  const auto r = cli({"simulate", "--size", "64", "--frames", "20", "--walk-std", "2.5", "--seed", "7", "-o", path});
  REQUIRE(r.code == 0);
  return path;
}

std::string write_random(const TempDir& dir, const std::string& name, std::size_t h, std::size_t w, std::size_t t,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> val(0.0, 3.0);
  std::vector<double> v(h * w * t);
  for (double& e : v) e = val(rng);
  const auto path = dir / name;
  write_fst(path, FrameSeries(h, w, t, v), std::string(R"({"seed": 99})"));
  return path;
}

}  // namespace

TEST_CASE("FST1 round trip is bitwise exact") {
  std::mt19937_64 rng(67);
  std::normal_distribution<double> val(0.0, 1e3);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> v(2 * 3 * 4);
    for (double& e : v) e = val(rng);
    v[0] = -0.0;
    v[1] = 5e-324;
    const FrameSeries s(2, 3, 4, v);
    const std::optional<std::string> meta = trial % 2 ? std::optional<std::string>(R"({"k": "é"})") : std::nullopt;
    const auto bytes = encode_fst(s, meta);
    CHECK(bytes.size() == 16 + 8 * v.size() + (meta ? 4 + meta->size() : 0));
    const auto back = decode_fst(bytes);
    CHECK(std::memcmp(back.series.values().data(), v.data(), v.size() * sizeof(double)) == 0);
    CHECK(back.metadata == meta);
    CHECK(encode_fst(back.series, back.metadata) == bytes);
  }
}

TEST_CASE("FST1 header layout and malformed files") {
  const auto bytes = encode_fst(FrameSeries(2, 1, 1, {1.0, 2.0}));
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "FST1");
  CHECK(bytes[4] == 2);
  CHECK(bytes[8] == 1);
  CHECK(bytes[12] == 1);
  // 1.0 little-endian is 00 .. 00 f0 3f.
  CHECK(bytes[16 + 6] == 0xf0);
  CHECK(bytes[16 + 7] == 0x3f);

  auto code_of = [](std::vector<std::uint8_t> b) {
    try {
      decode_fst(b);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  auto bad_magic = bytes;
  bad_magic[3] = '2';
  CHECK(code_of(bad_magic) == ErrorCode::MalformedFile);
  CHECK(code_of(std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 1)) == ErrorCode::MalformedFile);
  CHECK(code_of(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 10)) == ErrorCode::MalformedFile);
  auto trailing = bytes;
  trailing.push_back(7);
  CHECK(code_of(trailing) == ErrorCode::MalformedFile);
}

TEST_CASE("PGM header") {
  const std::vector<std::uint8_t> px{0, 1, 2, 3, 4, 255};
  const auto bytes = encode_pgm(3, 2, px);
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 6);
  CHECK(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())) == header);
  CHECK(std::vector<std::uint8_t>(bytes.begin() + static_cast<long>(header.size()), bytes.end()) == px);
  CHECK_THROWS_AS(encode_pgm(3, 3, px), Error);
}

TEST_CASE("simulate writes a re-readable stack and manifest") {
  TempDir dir;
  const auto path = simulate_small(dir);
  const auto stack = read_fst(path);
  CHECK(stack.series.height() == 64);
  CHECK(stack.series.width() == 64);
  CHECK(stack.series.frames() == 20);
  const auto meta = json::parse(*stack.metadata);
  CHECK(meta["seed"] == 7);
  CHECK(meta["walk_std"] == 2.5);

  const auto manifest = load_json(path + ".json");
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["seed"] == 7);
  CHECK(manifest["config"]["radius"].is_number());
  CHECK(manifest["wall_time_s"].is_number());

  const auto info = cli({"info", path});
  CHECK(info.code == 0);
  CHECK(info.out.find("64 x 64 x 20") != std::string::npos);
  CHECK(info.out.find(*stack.metadata) != std::string::npos);
  CHECK(fs::exists(path + ".info.json"));
}

TEST_CASE("usage errors exit 2") {
  TempDir dir;
  const auto missing = cli({"simulate", "--size", "64"});
  CHECK(missing.code == kExitUsage);
  CHECK(missing.err.find("--output") != std::string::npos);
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"bogus"}).code == kExitUsage);
  const auto in = write_random(dir, "x.fst", 2, 2, 5, 1);
  CHECK(cli({"filter", "--method", "wtv", "--lambda", "1", in, "-o", dir / "y.fst"}).code == kExitUsage);
  CHECK(cli({"filter", "--method", "l2", "--lambda", "1", "--gamma", "1", in, "-o", dir / "y.fst"}).code ==
        kExitUsage);
  CHECK(cli({"filter", "--method", "l2", "--lambda", "-1", in, "-o", dir / "y.fst"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("the installed binary reports usage errors through its exit status") {
  TempDir dir;
  const std::string cmd = std::string(WTVF_CLI_PATH) + " simulate --size 64 > " + (dir / "log") + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == kExitUsage);
  std::ifstream log(dir / "log");
  const std::string text((std::istreambuf_iterator<char>(log)), std::istreambuf_iterator<char>());
  CHECK(text.find("Usage") != std::string::npos);
}

TEST_CASE("malformed and missing inputs") {
  TempDir dir;
  const auto in = write_random(dir, "x.fst", 3, 3, 4, 2);
  auto bytes = read_file(in);
  bytes.resize(bytes.size() - 20);
  write_file(dir / "cut.fst", bytes);
  CHECK(cli({"info", dir / "cut.fst"}).code == kExitMalformed);
  CHECK(cli({"filter", "--method", "l2", "--lambda", "1", dir / "cut.fst", "-o", dir / "y.fst"}).code ==
        kExitMalformed);
  CHECK(cli({"info", dir / "absent.fst"}).code == kExitIo);
  CHECK(cli({"simulate", "--size", "16", "-o", dir / "no/such/dir/x.fst"}).code == kExitIo);
}

TEST_CASE("l1 and l2 at lambda 0 return the input payload bitwise") {
  TempDir dir;
  const auto in = write_random(dir, "x.fst", 3, 4, 6, 3);
  for (std::string method : {"l1", "l2"}) {
    const auto out = dir / (method + ".fst");
    REQUIRE(cli({"filter", "--method", method, "--lambda", "0", in, "-o", out}).code == 0);
    CHECK(payload(out) == payload(in));
    const auto m = load_json(out + ".json");
    CHECK(m["method"] == method);
    CHECK(m["seed"] == 99);
    CHECK(m["fidelity"] == 0.0);
    CHECK(m["config"]["lambda"] == 0.0);
    CHECK(m["config"].contains("threads"));
    if (method == "l1") {
      CHECK(m["config"]["tolerance"] == 1e-8);
      CHECK(m["config"]["max_iters"] == 50000);
    }
  }
}

TEST_CASE("wtv filter echoes its effective config and preserves frame masses") {
  TempDir dir;
  const auto in = write_random(dir, "x.fst", 2, 3, 4, 4);
  const auto out = dir / "w.fst";
  const auto r = cli({"filter", "--method", "wtv", "--lambda", "0.1", "--gamma", "1", "--alpha", "0.05",
                      "--sinkhorn-iters", "50", in, "-o", out, "--manifest", dir / "m.json"});
  REQUIRE(r.code == 0);
  const auto m = load_json(dir / "m.json");
  for (const char* key : {"lambda", "gamma", "alpha", "sinkhorn_iters", "tolerance", "max_outer_iters",
                          "truncation_radius", "log_domain", "start_blend", "mass_floor", "threads"}) {
    CHECK_MESSAGE(m["config"].contains(key), key);
  }
  CHECK(m["config"]["gamma"] == 1.0);
  CHECK(m["objective"]["trace"].size() == m["iterations"].get<std::size_t>());
  const auto x = read_fst(in).series;
  const auto y = read_fst(out).series;
  for (std::size_t t = 0; t < x.frames(); ++t) CHECK(y.frame_sum(t) == doctest::Approx(x.frame_sum(t)).epsilon(1e-9));
}

TEST_CASE("wtv that hits its iteration cap still writes a manifest and exits 5") {
  TempDir dir;
  const auto in = write_random(dir, "x.fst", 2, 2, 3, 5);
  const auto out = dir / "w.fst";
  const auto r = cli({"filter", "--method", "wtv", "--lambda", "0.1", "--gamma", "1", "--max-iters", "2",
                      "--tol", "1e-15", in, "-o", out});
  CHECK(r.code == kExitNoConvergence);
  CHECK(load_json(out + ".json")["converged"] == false);
}

TEST_CASE("calibrate examples") {
  TempDir dir;
  const auto in = write_random(dir, "x.fst", 2, 2, 12, 6);
  const auto zero = cli({"calibrate", "--method", "l2", "--target-fidelity", "0", in});
  CHECK(zero.code == 0);
  CHECK(zero.out.find("0\n") == 0);
  CHECK(load_json(in + ".calibrate.json")["lambda"] == 0.0);

  CHECK(cli({"calibrate", "--method", "l2", "--target-fidelity", "1", "--bracket", "5,1", in}).code == kExitUsage);
  CHECK(cli({"calibrate", "--method", "l2", "--target-fidelity", "1e9", "--bracket", "0,10", in}).code ==
        kExitBracket);

  // Match l2 to the fidelity of l1 at lambda = 1.
  REQUIRE(cli({"filter", "--method", "l1", "--lambda", "1", in, "-o", dir / "l1.fst"}).code == 0);
  const double target = load_json(dir / "l1.fst.json")["fidelity"];
  std::ostringstream t;
  t << std::setprecision(17) << target;
  const auto cal = cli({"calibrate", "--method", "l2", "--target-fidelity", t.str(), "--bracket", "0,1000", in});
  REQUIRE(cal.code == 0);
  const double lambda = std::stod(cal.out);
  CHECK(lambda > 0.0);
  CHECK(lambda < 1000.0);
  std::ostringstream l;
  l << std::setprecision(17) << lambda;
  REQUIRE(cli({"filter", "--method", "l2", "--lambda", l.str(), in, "-o", dir / "l2.fst"}).code == 0);
  const double got = load_json(dir / "l2.fst.json")["fidelity"];
  CHECK(std::abs(got - target) <= 1e-3 * target);
}

TEST_CASE("compare writes frames, montage, metrics and manifest") {
  TempDir dir;
  const auto in = dir / "ring.fst";
  REQUIRE(cli({"simulate", "--size", "12", "--frames", "3", "--radius", "3", "--thickness", "2", "--walk-std", "0.5",
               "-o", in})
              .code == 0);
  const auto out = dir / "cmp";
  const auto r = cli({"compare", in, "--out-dir", out, "--wtv-lambda", "0.1", "--alpha", "0.01", "--max-iters", "50",
                      "--l1-lambda", "1", "--l2-lambda", "1"});
  REQUIRE(r.code != kExitUsage);
  for (const char* method : {"raw", "l1", "l2", "wtv"}) {
    for (int t = 0; t < 3; ++t) {
      const auto name = std::string(method) + "_t00" + std::to_string(t) + ".pgm";
      const auto bytes = read_file(out + "/" + name);
      CHECK(bytes.size() == std::string("P5\n12 12\n255\n").size() + 144);
    }
  }
  const auto montage = read_file(out + "/montage.pgm");
  const std::string header = "P5\n" + std::to_string(3 * 12 + 2 * 2) + " " + std::to_string(4 * 12 + 3 * 2) + "\n255\n";
  CHECK(std::string(montage.begin(), montage.begin() + static_cast<long>(header.size())) == header);

  std::ifstream csv(out + "/metrics.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "frame,method,fidelity,mass,contrast");
  int rows = 0;
  while (std::getline(csv, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 3 * 4);
  const auto m = load_json(out + "/manifest.json");
  CHECK(m["command"] == "compare");
  CHECK(m["config"]["wtv"]["gamma"] == 1.0);
  CHECK(fs::exists(out + "/wtv.fst"));
}

TEST_CASE("compare on a constant two-frame input") {
  TempDir dir;
  const auto in = dir / "c.fst";
  write_fst(in, FrameSeries(3, 3, 2, std::vector<double>(18, 2.0)));
  const auto out = dir / "cmp";
  REQUIRE(cli({"compare", in, "--out-dir", out, "--wtv-lambda", "0.5", "--l1-lambda", "1", "--l2-lambda", "1"}).code ==
          0);
  for (int t = 0; t < 2; ++t) {
    const auto raw = read_file(out + "/raw_t00" + std::to_string(t) + ".pgm");
    for (const char* method : {"l1", "l2"}) {
      CHECK(read_file(out + "/" + method + "_t00" + std::to_string(t) + ".pgm") == raw);
    }
  }
  // Uniform frames are not a fixed point of WTV on a bounded grid once
  // lambda > 0 (edge pixels have fewer cheap neighbours), so the wtv row only
  // keeps the frame masses and the grid's symmetry.
  const auto w = read_fst(out + "/wtv.fst").series;
  for (std::size_t t = 0; t < 2; ++t) {
    CHECK(w.frame_sum(t) == doctest::Approx(18.0).epsilon(1e-9));
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 3; ++c) {
        CHECK(w.at(t, r * 3 + c) == doctest::Approx(w.at(t, (2 - r) * 3 + c)).epsilon(1e-9));
        CHECK(w.at(t, r * 3 + c) == doctest::Approx(w.at(t, c * 3 + r)).epsilon(1e-9));
      }
    }
  }
  CHECK(load_json(out + "/manifest.json")["baselines_passthrough"] == true);
}
