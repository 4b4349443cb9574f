#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string err;
};

const fs::path kRoot = fs::temp_directory_path() / "qprobe_cli_test";

Result run(const std::string& args) {
  const fs::path err = kRoot / "stderr.txt";
  const std::string cmd = std::string(QPROBE_CLI) + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = kRoot / name;
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Fixture {
  Fixture() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
  }
  ~Fixture() { fs::remove_all(kRoot); }
};

const char* kGood = "delta_thz = 0.1\ngamma_cm1 = 0.05\nlambda_over_gamma = 2\nsamples = 100\nt_max = 300\n";

}  // namespace

TEST_CASE_FIXTURE(Fixture, "usage errors exit with 2") {
  CHECK(run("--version").code == 0);
  CHECK(run("--help").code == 0);
  CHECK(run("").code == 2);
  CHECK(run("simulate").code == 2);
  CHECK(run("simulate --config " + (kRoot / "missing.conf").string()).code == 2);
  const fs::path good = write_config("good.conf", kGood);
  CHECK(run("simulate --config " + good.string() + " --solver euler").code == 2);
  CHECK(run("simulate --config " + good.string() + " --depth -3").code == 2);
  CHECK(run("simulate --config " + good.string() + " --dt 0").code == 2);
  CHECK(run("simulate --config " + good.string() + " --jobs 2").code == 2);
  CHECK(run("frobnicate --config " + good.string()).code == 2);
}

TEST_CASE_FIXTURE(Fixture, "malformed config: exit 2, message with line, no output") {
  const fs::path bad = write_config("bad.conf", "delta_thz = 0.1\ngamma_cm1 = 0.05\nlambda_over_gamma 2\n");
  const fs::path out = kRoot / "out_bad";
  for (const char* cmd : {"simulate", "fisher", "sweep", "validate"}) {
    const Result r = run(std::string(cmd) + " --config " + bad.string() + " --out " + out.string());
    CHECK(r.code == 2);
    CHECK(r.err.find("qprobe: " + bad.string() + ":3: expected 'key = value'") != std::string::npos);
  }
  CHECK_FALSE(fs::exists(out));

  const fs::path range = write_config("range.conf", std::string(kGood) + "chi = 4\n");
  const Result r = run("fisher --config " + range.string() + " --out " + out.string());
  CHECK(r.code == 2);
  CHECK(r.err.find(":6: chi must lie in [0, 1]") != std::string::npos);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE_FIXTURE(Fixture, "commands write their outputs") {
  const fs::path good = write_config("good.conf", kGood);
  const fs::path out = kRoot / "out";
  CHECK(run("simulate --config " + good.string() + " --out " + out.string() + " --depth 12 --dt 0.25 --seedless").code ==
        0);
  const std::string traj = slurp(out / "trajectory.csv");
  CHECK(traj.find("# depth: 12\n") != std::string::npos);
  CHECK(traj.find("# dt: 0.25\n") != std::string::npos);
  CHECK(run("simulate --config " + good.string() + " --out " + out.string() + " --solver rwa").code == 0);
  CHECK(slurp(out / "trajectory.csv").find("# solver: rwa\n") != std::string::npos);

  CHECK(run("fisher --config " + good.string() + " --out " + out.string()).code == 0);
  CHECK(fs::exists(out / "fisher_series.csv"));
  CHECK(fs::exists(out / "metrics.json"));
  CHECK(run("validate --config " + good.string() + " --out " + out.string()).code == 0);
  CHECK(slurp(out / "validation.json").find("\"passed\": true") != std::string::npos);
  for (const auto& e : fs::directory_iterator(out)) CHECK(e.path().extension() != ".tmp");
}

TEST_CASE_FIXTURE(Fixture, "sweep output is independent of --jobs") {
  const fs::path sw = write_config("sweep.conf", std::string(kGood) + "axis = chi\nvalues = 0:0.5:1\n");
  CHECK(run("sweep --config " + sw.string() + " --out " + (kRoot / "j1").string() + " --jobs 1").code == 0);
  CHECK(run("sweep --config " + sw.string() + " --out " + (kRoot / "j3").string() + " --jobs 3").code == 0);
  const std::string a = slurp(kRoot / "j1" / "sweep.csv");
  CHECK_FALSE(a.empty());
  CHECK(a == slurp(kRoot / "j3" / "sweep.csv"));
}

TEST_CASE_FIXTURE(Fixture, "failed validation exits with 4, solver misuse with 2") {
  const fs::path hard = write_config("hard.conf", "delta_thz = 0.1\nchi = 1\ngamma_cm1 = 0.3\nlambda_over_gamma = 0.5\n"
                                                  "samples = 100\noracle = off\nconvergence_depths = 1, 2\n");
  const fs::path out = kRoot / "out_hard";
  const Result r = run("validate --config " + hard.string() + " --out " + out.string());
  CHECK(r.code == 4);
  CHECK(r.err.find("validation failed") != std::string::npos);
  CHECK(fs::exists(out / "validation.json"));

  const fs::path oracle = write_config("oracle.conf", std::string(kGood) + "solver = oracle\n");
  CHECK(run("fisher --config " + oracle.string() + " --out " + out.string()).code == 2);
  CHECK(run("simulate --config " + hard.string() + " --out " + out.string() + " --solver nz --dt 100").code == 2);
}
