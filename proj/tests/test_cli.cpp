#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "lips/commands.hpp"
#include "lips/error.hpp"
#include "lips/run_config.hpp"
#include "lips/wake_sleep.hpp"

using namespace lips;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "lips_test_cli";

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

fs::path put(const std::string& name, const json& j) {
  fs::create_directories(kRoot);
  fs::path p = kRoot / name;
  std::ofstream(p) << j.dump();
  return p;
}

// runs the tool from kRoot and returns its exit code
int run_tool(const std::string& args) {
  fs::create_directories(kRoot);
  std::string cmd = "cd '" + kRoot.string() + "' && '" LIPS_CLI_PATH "' " + args + " >/dev/null 2>&1";
  int s = std::system(cmd.c_str());
  return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
}

// a d=8 dataset shared by the command tests
void small_dataset() {
  static bool done = false;
  if (done) return;
  fs::remove_all(kRoot / "ds");
  put("g.json", {{"d", 8}, {"n_train", 6}, {"n_test", 4}});
  REQUIRE(run_tool("generate --config g.json --seed 3 --out ds") == 0);
  done = true;
}

json small_train() {
  return {{"dataset", "ds"}, {"pretrain_steps", 20}, {"width", 8},        {"global_iters", 2},
          {"updates", 2},    {"reuse", 2},           {"batch_sleep", 4},  {"batch_wake", 4}};
}

}  // namespace

TEST_CASE("run config: unknown keys, types, hash, seed precedence") {
  CHECK_THROWS_AS(make_run_config("generate", {{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(make_run_config("generate", {{"d", "32"}}), ConfigError);
  CHECK_THROWS_AS(make_run_config("generate", {{"p_mask", true}}), ConfigError);
  CHECK_THROWS_AS(make_run_config("nope", json::object()), ConfigError);
  CHECK_THROWS_AS(make_run_config("generate", json::array()), ConfigError);
  // integers are fine where a double is expected
  CHECK(make_run_config("generate", {{"T", 5}}).get<double>("T") == 5.0);

  auto a = json::parse(R"({"d": 8, "T": 5.0, "theta": [0.1, 1.0, 0.4, 0.05], "K": 3})");
  auto b = json::parse(R"({"K": 3, "theta": [0.1, 1.0, 0.4, 0.05], "T": 5.0, "d": 8})");
  auto ra = make_run_config("generate", a, 1), rb = make_run_config("generate", b, 1);
  CHECK(ra.hash == rb.hash);
  CHECK(ra.hash.size() == 16);
  CHECK(ra.hash != make_run_config("generate", a, 2).hash);
  CHECK(ra.hash != make_run_config("oracle", json::object(), 1).hash);
  a["out"] = "elsewhere";
  a["threads"] = 8;
  CHECK(make_run_config("generate", a, 1).hash == ra.hash);
  CHECK(ra.provenance() == "lips " + std::string(kVersion) + " config=" + ra.hash + " seed=1");

  unsetenv(kSeedEnv);
  CHECK(make_run_config("generate", json::object()).seed == 0);
  setenv(kSeedEnv, "17", 1);
  CHECK(make_run_config("generate", json::object()).seed == 17);
  CHECK(make_run_config("generate", {{"seed", 5}}).seed == 5);
  CHECK(make_run_config("generate", {{"seed", 5}}, 9).seed == 9);
  setenv(kSeedEnv, "x1", 1);
  CHECK_THROWS_AS(make_run_config("generate", json::object()), ConfigError);
  unsetenv(kSeedEnv);
  CHECK_THROWS_AS(make_run_config("generate", {{"seed", -1}}), ConfigError);

  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("generate defaults and determinism") {
  auto d = command_defaults("generate");
  CHECK(d["d"] == 32);
  CHECK(d["T"] == 10.0);
  CHECK(d["K"] == 10);
  CHECK(d["p_mask"] == 0.5);
  CHECK(d["theta"] == json({0.1, 1.0, 0.4, 0.05}));
  CHECK(command_defaults("train")["theta"] == json({0.2, 0.2, 0.2, 0.2}));

  fs::remove_all(kRoot / "gen1");
  fs::remove_all(kRoot / "gen8");
  REQUIRE(run_tool("generate --seed 4 --threads 1 --out gen1") == 0);
  REQUIRE(run_tool("generate --seed 4 --threads 8 --out gen8") == 0);
  auto t1 = tree(kRoot / "gen1");
  CHECK(t1 == tree(kRoot / "gen8"));
  CHECK(t1.size() == 2 + 4 * 50);
  auto params = json::parse(t1["params.json"]);
  CHECK(params["K"] == 10);
  CHECK(params["T"] == 10.0);
  CHECK(params["p_mask"] == 0.5);
  CHECK(params["n_train"] == 50);
  auto spec = json::parse(t1["spec.json"]);
  CHECK(spec["d"] == 32);
  std::string prov = params["provenance"];
  CHECK(prov.find("seed=4") != std::string::npos);
  CHECK(t1["obs/test/3.obs"].rfind("# " + prov, 0) == 0);

  put("bad.json", {{"bogus", 1}});
  CHECK(run_tool("generate --config bad.json --out x") == kExitConfig);
  std::ofstream(kRoot / "broken.json") << "{\"d\": ";
  CHECK(run_tool("generate --config broken.json --out x") == kExitConfig);
  put("neg.json", {{"p_mask", 1.5}});
  CHECK(run_tool("generate --config neg.json --out x") == kExitConfig);
  CHECK(run_tool("generate --config missing.json --out x") == kExitIo);
  CHECK(run_tool("frobnicate") == kExitConfig);
}

TEST_CASE("oracle: K = 0, csv output, size guard") {
  fs::remove_all(kRoot / "o3");
  put("g3.json", {{"d", 3}, {"n_train", 1}, {"n_test", 1}, {"K", 3}, {"T", 2.0}});
  REQUIRE(run_tool("generate --config g3.json --out o3") == 0);
  put("or0.json", {{"spec", "o3/spec.json"}, {"T", 2.0}});
  REQUIRE(run_tool("oracle --config or0.json --out or0") == 0);
  CHECK(slurp(kRoot / "or0/logz.csv").find("log_z\n0\n") != std::string::npos);

  put("or.json", {{"spec", "o3/spec.json"}, {"obs", "o3/obs/test/0.obs"}, {"T", 2.0}, {"dt", 0.5}});
  REQUIRE(run_tool("oracle --config or.json --out or") == 0);
  std::istringstream is(slurp(kRoot / "or/marginals.csv"));
  std::string line;
  std::getline(is, line);
  CHECK(line.rfind("# lips ", 0) == 0);
  std::getline(is, line);
  CHECK(line == "time,node,state,probability");
  std::map<std::pair<std::string, int>, double> mass;
  int rows = 0;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::string t, i, v, p;
    std::getline(ss, t, ',');
    std::getline(ss, i, ',');
    std::getline(ss, v, ',');
    std::getline(ss, p, ',');
    mass[{t, std::stoi(i)}] += std::stod(p);
    ++rows;
  }
  CHECK(rows % 9 == 0);
  CHECK(rows >= 5 * 9);
  for (auto& [k, m] : mass) CHECK(m == doctest::Approx(1.0).epsilon(1e-9));
  double lz = std::stod(slurp(kRoot / "or/logz.csv").substr(slurp(kRoot / "or/logz.csv").find("log_z\n") + 6));
  CHECK(lz < 0.0);

  fs::remove_all(kRoot / "o13");
  put("g13.json", {{"d", 13}, {"n_train", 0}, {"n_test", 0}});
  REQUIRE(run_tool("generate --config g13.json --out o13") == 0);
  put("or13.json", {{"spec", "o13/spec.json"}});
  CHECK(run_tool("oracle --config or13.json --out or13") == kExitConfig);
  put("orno.json", {{"spec", "nowhere.json"}});
  CHECK(run_tool("oracle --config orno.json --out orno") == kExitIo);
}

TEST_CASE("train-twist runs the sleep phase alone") {
  small_dataset();
  json c = small_train();
  c["pretrain_steps"] = 30;
  c["plateau_window"] = 1000;
  put("tt.json", c);
  REQUIRE(run_tool("train-twist --config tt.json --out tt") == 0);
  std::istringstream is(slurp(kRoot / "tt/telemetry.csv"));
  std::string line;
  std::getline(is, line);
  CHECK(line.rfind("# lips ", 0) == 0);
  std::getline(is, line);
  CHECK(line == "global_iter,phase,step,loss,mean_ess,min_ess,alpha0,alpha1,beta,gamma,rpe");
  CHECK(line == telemetry_header());
  int rows = 0;
  while (std::getline(is, line)) {
    CHECK(line.find(",pretrain,") != std::string::npos);
    ++rows;
  }
  CHECK(rows == 30);
  auto ck = json::parse(slurp(kRoot / "tt/checkpoint.json"));
  CHECK(ck["global_iter"] == 0);
  CHECK(ck["pretrain_done"] == 30);
  // theta stays at the dataset's truth
  CHECK(ck["theta_adam"]["step"] == 0);
}

TEST_CASE("train: telemetry, checkpoints, identical resume") {
  small_dataset();
  put("tr.json", small_train());
  fs::remove_all(kRoot / "trA");
  REQUIRE(run_tool("train --config tr.json --out trA --svg") == 0);
  CHECK(fs::exists(kRoot / "trA/checkpoints/iter_1.json"));
  CHECK(fs::exists(kRoot / "trA/checkpoints/iter_2.json"));
  CHECK(fs::exists(kRoot / "trA/loss.svg"));
  CHECK(slurp(kRoot / "trA/rpe.svg").rfind("<svg", 0) == 0);
  auto theta = slurp(kRoot / "trA/theta.csv");
  CHECK(theta.find("alpha0,alpha1,beta,gamma,rpe") != std::string::npos);

  json r = small_train();
  r["resume"] = "trA/checkpoints/iter_1.json";
  put("trR.json", r);
  fs::remove_all(kRoot / "trR");
  REQUIRE(run_tool("train --config trR.json --out trR") == 0);
  CHECK(slurp(kRoot / "trA/checkpoint.json") == slurp(kRoot / "trR/checkpoint.json"));
  CHECK(slurp(kRoot / "trA/theta.csv") == slurp(kRoot / "trR/theta.csv"));

  // a checkpoint from another config is refused
  json other = small_train();
  other["lr_theta"] = 1e-2;
  other["resume"] = "trA/checkpoints/iter_1.json";
  put("trX.json", other);
  CHECK(run_tool("train --config trX.json --out trX") == kExitConfig);
}

TEST_CASE("infer: methods, particle defaults, outputs, collapse code") {
  small_dataset();
  json c = small_train();
  put("tt2.json", c);
  REQUIRE(run_tool("train-twist --config tt2.json --out tw") == 0);

  auto mean_ess = [](const fs::path& file) {
    auto t = read_csv(file.string());
    return summarize(t.column("mean_ess")).mean;
  };
  for (const char* m : {"tsmc-kl", "tsmc-dre"}) {
    put("inf.json", {{"dataset", "ds"}, {"checkpoint", "tw/checkpoint.json"}, {"method", m}, {"count", 2}});
    fs::remove_all(kRoot / "inf");
    REQUIRE(run_tool("infer --config inf.json --out inf --svg") == 0);
    auto t = read_csv((kRoot / "inf/metrics.csv").string());
    CHECK(t.header == std::vector<std::string>{"path", "ce", "brier", "log_z", "mean_ess", "min_ess"});
    CHECK(t.rows.size() == 2);
    CHECK(mean_ess(kRoot / "inf/metrics.csv") <= 25.0 + 1e-9);
    CHECK(fs::exists(kRoot / "inf/ess_history/1.csv"));
    CHECK(fs::exists(kRoot / "inf/marginals/0.csv"));
    CHECK(fs::exists(kRoot / "inf/samples/1.path"));
    CHECK(fs::exists(kRoot / "inf/logz.csv"));
    CHECK(fs::exists(kRoot / "inf/ess_history.svg"));
    for (auto& row : t.rows) {
      CHECK(std::isfinite(row[1]));
      CHECK(row[1] > 0.0);
      CHECK(row[2] >= 0.0);
    }
  }
  put("bpf.json", {{"dataset", "ds"}, {"method", "bpf"}, {"count", 2}});
  REQUIRE(run_tool("infer --config bpf.json --out bpf") == 0);
  CHECK(mean_ess(kRoot / "bpf/metrics.csv") > 25.0);
  CHECK(mean_ess(kRoot / "bpf/metrics.csv") <= 250.0 + 1e-9);

  put("badm.json", {{"dataset", "ds"}, {"method", "magic"}});
  CHECK(run_tool("infer --config badm.json --out x") == kExitConfig);
  put("nock.json", {{"dataset", "ds"}, {"method", "tsmc-kl"}});
  CHECK(run_tool("infer --config nock.json --out x") == kExitConfig);
  put("range.json", {{"dataset", "ds"}, {"method", "bpf"}, {"first", 3}, {"count", 5}});
  CHECK(run_tool("infer --config range.json --out x") == kExitConfig);

  // noiseless, unmasked snapshots with two particles: the bootstrap filter dies
  put("gc.json", {{"d", 8}, {"n_train", 0}, {"n_test", 2}, {"delta", 0.0}, {"p_mask", 0.0}});
  REQUIRE(run_tool("generate --config gc.json --out dsc") == 0);
  put("ic.json", {{"dataset", "dsc"}, {"method", "bpf"}, {"particles", 2}});
  CHECK(run_tool("infer --config ic.json --out ic") == kExitCollapse);
}

TEST_CASE("evaluate: mean and two standard errors") {
  fs::create_directories(kRoot);
  std::ofstream(kRoot / "m.csv") << "# made by hand\npath,ce,brier\n0,1,0.5\n1,2,0.5\n2,3,0.5\n3,4,0.5\n";
  REQUIRE(run_tool("evaluate m.csv --out ev") == 0);
  auto t = slurp(kRoot / "ev/summary.csv");
  // mean 2.5, sd sqrt(5/3), 2 SE = 2 sqrt(5/12)
  auto s = summarize({1, 2, 3, 4});
  CHECK(s.mean == 2.5);
  CHECK(s.two_se == doctest::Approx(2.0 * std::sqrt(5.0 / 12.0)).epsilon(1e-14));
  CHECK(t.find(fmt::format("m.csv,ce,2.5,{},4\n", s.two_se)) != std::string::npos);
  CHECK(t.find("m.csv,brier,0.5,0,4\n") != std::string::npos);
  REQUIRE(run_tool("evaluate m.csv --out ev2 --threads 8") == 0);
  CHECK(slurp(kRoot / "ev2/summary.csv") == t);

  CHECK(run_tool("evaluate --out ev3") == kExitConfig);
  std::ofstream(kRoot / "empty.csv") << "path,ce\n";
  CHECK(run_tool("evaluate empty.csv --out ev4") == kExitOther);
  CHECK(run_tool("evaluate nowhere.csv --out ev5") == kExitIo);
  CHECK_THROWS_AS(summarize({}), Error);
}

TEST_CASE("every command is byte-identical across thread counts") {
  small_dataset();
  put("tr.json", small_train());
  put("tw.json", small_train());
  put("inf.json", {{"dataset", "ds"}, {"checkpoint", "tw1/checkpoint.json"}, {"count", 3}});
  put("bpf.json", {{"dataset", "ds"}, {"method", "bpf"}, {"count", 3}});
  put("or.json", {{"spec", "o3/spec.json"}, {"obs", "o3/obs/test/0.obs"}, {"T", 2.0}, {"dt", 0.5}});
  put("g.json", {{"d", 8}, {"n_train", 6}, {"n_test", 4}});
  put("g3.json", {{"d", 3}, {"n_train", 1}, {"n_test", 1}, {"K", 3}, {"T", 2.0}});
  REQUIRE(run_tool("generate --config g3.json --out o3") == 0);
  REQUIRE(run_tool("train-twist --config tw.json --out tw1") == 0);
  const char* cmds[] = {"generate --config g.json", "train-twist --config tw.json", "train --config tr.json",
                        "infer --config inf.json",  "infer --config bpf.json",      "oracle --config or.json"};
  for (const char* c : cmds) {
    CAPTURE(c);
    fs::remove_all(kRoot / "det1");
    fs::remove_all(kRoot / "det8");
    REQUIRE(run_tool(std::string(c) + " --seed 5 --threads 1 --out det1 --svg") == 0);
    REQUIRE(run_tool(std::string(c) + " --seed 5 --threads 8 --out det8 --svg") == 0);
    CHECK(tree(kRoot / "det1") == tree(kRoot / "det8"));
  }
}
