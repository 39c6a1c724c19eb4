#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

#ifndef SCOPESIM_CLI_PATH
#error "SCOPESIM_CLI_PATH must point at the scopesim binary"
#endif

const char* kCli = SCOPESIM_CLI_PATH;

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const fs::path out_file =
      fs::temp_directory_path() / ("scopesim_cli_out_" + std::to_string(::getpid()));
  const std::string command =
      std::string(kCli) + " " + args + " > " + out_file.string() + " 2>&1";
  const int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  std::ostringstream text;
  text << in.rdbuf();
  result.output = text.str();
  fs::remove(out_file);
  return result;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const std::string kMicro =
    " --set scenegen.point_count=8000 --set env.obs_width=24 --set env.obs_height=20";

}  // namespace

TEST_CASE("gen-scenes writes a suite with the requested split") {
  TempDir dir("scopesim_cli_gen");
  const RunResult r = run("gen-scenes --out " + (dir.path / "suite").string() +
                          " --count 4 --split 3:1 --seed 5" + kMicro);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("suite statistics") != std::string::npos);
  CHECK(fs::exists(dir.path / "suite/train.manifest"));
  CHECK(fs::exists(dir.path / "suite/test.manifest"));
  CHECK(fs::exists(dir.path / "suite/scenes/scene_003.scs"));
  CHECK(fs::exists(dir.path / "suite/config.cfg"));

  int train_lines = 0, test_lines = 0;
  std::ifstream train(dir.path / "suite/train.manifest");
  std::string line;
  while (std::getline(train, line))
    if (line.rfind("env ", 0) == 0) ++train_lines;
  std::ifstream test(dir.path / "suite/test.manifest");
  while (std::getline(test, line))
    if (line.rfind("env ", 0) == 0) ++test_lines;
  CHECK(train_lines == 3);
  CHECK(test_lines == 1);
}

TEST_CASE("gen-scenes is byte-identical for a fixed seed") {
  TempDir dir("scopesim_cli_gen_det");
  const std::string a = (dir.path / "a").string();
  const std::string b = (dir.path / "b").string();
  CHECK(run("gen-scenes --out " + a + " --count 3 --split 2:1 --seed 9" + kMicro)
            .exit_code == 0);
  CHECK(run("gen-scenes --out " + b + " --count 3 --split 2:1 --seed 9" + kMicro)
            .exit_code == 0);
  CHECK(read_file(a + "/scenes/scene_001.scs") == read_file(b + "/scenes/scene_001.scs"));
  CHECK(read_file(a + "/trajs/scene_001_demo00.traj") ==
        read_file(b + "/trajs/scene_001_demo00.traj"));
  CHECK(read_file(a + "/train.manifest") == read_file(b + "/train.manifest"));
}

TEST_CASE("gen-scenes statistics stay in the expected ranges") {
  TempDir dir("scopesim_cli_gen_stats");
  const RunResult r = run("gen-scenes --out " + (dir.path / "suite").string() +
                          " --count 6 --split 5:1 --seed 3" + kMicro);
  REQUIRE(r.exit_code == 0);
  double distance = 0.0, steps = 0.0;
  std::istringstream out(r.output);
  std::string line;
  while (std::getline(out, line)) {
    if (line.find("distance / mm") != std::string::npos)
      distance = std::stod(line.substr(line.find("mm") + 2));
    if (line.find("steps") != std::string::npos && line.find("+/-") != std::string::npos)
      steps = std::stod(line.substr(15));
  }
  CHECK(distance >= 4.0);
  CHECK(distance <= 14.0);
  CHECK(steps >= 4.0);
  CHECK(steps <= 14.0);
}

TEST_CASE("augment produces (rate+1) demo entries per scene and is deterministic") {
  TempDir dir("scopesim_cli_aug");
  const std::string suite = (dir.path / "suite").string();
  REQUIRE(run("gen-scenes --out " + suite + " --count 3 --split 2:1 --seed 4" + kMicro)
              .exit_code == 0);

  const std::string aug = (dir.path / "aug").string();
  const RunResult r = run("augment --in " + suite + "/train.manifest --out " + aug +
                          " --rate 3 --seed 4" + kMicro);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("augmented 6 trajectories") != std::string::npos);

  int demos = 0, envs = 0;
  std::ifstream manifest(aug + "/augmented.manifest");
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.rfind("demo ", 0) == 0) ++demos;
    if (line.rfind("env ", 0) == 0) ++envs;
  }
  CHECK(envs == 2);
  CHECK(demos == 2 * (3 + 1));

  const std::string aug2 = (dir.path / "aug2").string();
  REQUIRE(run("augment --in " + suite + "/train.manifest --out " + aug2 +
              " --rate 3 --seed 4" + kMicro)
              .exit_code == 0);
  CHECK(read_file(aug + "/trajs/scene_000_aug002.traj") ==
        read_file(aug2 + "/trajs/scene_000_aug002.traj"));
}

TEST_CASE("train bc with zero epochs equals the random initialization") {
  TempDir dir("scopesim_cli_bc0");
  const std::string suite = (dir.path / "suite").string();
  REQUIRE(run("gen-scenes --out " + suite + " --count 2 --split 1:1 --seed 6" + kMicro)
              .exit_code == 0);

  const std::string run_a = (dir.path / "bc_a").string();
  const std::string run_b = (dir.path / "bc_b").string();
  CHECK(run("train bc --demos " + suite + "/train.manifest --out " + run_a +
            " --seed 6 --set train.bc_epochs=0" + kMicro)
            .exit_code == 0);
  CHECK(run("train bc --demos " + suite + "/train.manifest --out " + run_b +
            " --seed 6 --set train.bc_epochs=0" + kMicro)
            .exit_code == 0);
  CHECK(read_file(run_a + "/policy.net") == read_file(run_b + "/policy.net"));

  // evaluating the 0-epoch checkpoint equals evaluating it twice (pipeline identity)
  const RunResult eval_a = run("eval --manifest " + suite + "/test.manifest --policy " +
                               run_a + "/policy.net --episodes 3 --seed 6 --out " +
                               (dir.path / "eval_a").string() + kMicro);
  const RunResult eval_b = run("eval --manifest " + suite + "/test.manifest --policy " +
                               run_b + "/policy.net --episodes 3 --seed 6 --out " +
                               (dir.path / "eval_b").string() + kMicro);
  CHECK(eval_a.exit_code == 0);
  CHECK(eval_b.exit_code == 0);
  CHECK(read_file((dir.path / "eval_a.tsv")) == read_file((dir.path / "eval_b.tsv")));
}

TEST_CASE("train illc smoke run writes checkpoints, logs, and evals") {
  TempDir dir("scopesim_cli_illc");
  const std::string suite = (dir.path / "suite").string();
  REQUIRE(run("gen-scenes --out " + suite + " --count 2 --split 1:1 --seed 8" + kMicro)
              .exit_code == 0);
  const std::string aug = (dir.path / "aug").string();
  REQUIRE(run("augment --in " + suite + "/train.manifest --out " + aug +
              " --rate 2 --seed 8" + kMicro)
              .exit_code == 0);

  const std::string illc = (dir.path / "illc").string();
  const RunResult train = run(
      "train illc --envs " + aug + "/augmented.manifest --demos " + aug +
      "/augmented.manifest --out " + illc +
      " --seed 8 --set train.iterations=1 --set train.rollout_capacity=128 "
      "--set train.bc_epochs=1" +
      kMicro);
  CHECK(train.exit_code == 0);
  CHECK(fs::exists(illc + "/policy.net"));
  CHECK(fs::exists(illc + "/policy_prior.net"));
  CHECK(fs::exists(illc + "/disc_rb.net"));
  CHECK(fs::exists(illc + "/disc_h.net"));
  CHECK(fs::exists(illc + "/train.log"));
  CHECK(read_file(illc + "/train.log").find("iter=0") != std::string::npos);

  const RunResult eval = run("eval --manifest " + suite + "/test.manifest --policy " +
                             illc + "/policy.net --episodes 2 --seed 8 --out " +
                             (dir.path / "report").string() + kMicro);
  CHECK(eval.exit_code == 0);
  CHECK(fs::exists(dir.path / "report.txt"));
  CHECK(fs::exists(dir.path / "report.tsv"));
  CHECK(read_file(dir.path / "report.tsv").find("aggregate") != std::string::npos);
}

TEST_CASE("eval oracle controller reports SR 100 and features export works") {
  TempDir dir("scopesim_cli_oracle");
  const std::string suite = (dir.path / "suite").string();
  REQUIRE(run("gen-scenes --out " + suite + " --count 2 --split 1:1 --seed 10" + kMicro)
              .exit_code == 0);
  const RunResult oracle =
      run("eval --manifest " + suite + "/test.manifest --controller oracle "
          "--episodes 2 --seed 10 --out " +
          (dir.path / "oracle").string() + kMicro);
  CHECK(oracle.exit_code == 0);
  CHECK(oracle.output.find("SR 100.00") != std::string::npos);

  const std::string bc = (dir.path / "bc").string();
  REQUIRE(run("train bc --demos " + suite + "/train.manifest --out " + bc +
              " --seed 10 --set train.bc_epochs=1" + kMicro)
              .exit_code == 0);
  const RunResult features =
      run("eval --manifest " + suite + "/test.manifest --policy " + bc +
          "/policy.net --episodes 1 --seed 10 --out " + (dir.path / "ev").string() +
          " --export-features " + (dir.path / "features.tsv").string() + kMicro);
  CHECK(features.exit_code == 0);
  std::ifstream ftsv(dir.path / "features.tsv");
  std::string first_line;
  std::getline(ftsv, first_line);
  CHECK(!first_line.empty());
}

TEST_CASE("preview renders pose and trajectory frames") {
  TempDir dir("scopesim_cli_preview");
  const std::string suite = (dir.path / "suite").string();
  REQUIRE(run("gen-scenes --out " + suite + " --count 2 --split 1:1 --seed 12" + kMicro)
              .exit_code == 0);

  const RunResult pose = run("preview --scene " + suite +
                             "/scenes/scene_000.scs --pose \"0 0 0 0 0 0\" --out " +
                             (dir.path / "shot").string() + kMicro);
  CHECK(pose.exit_code == 0);
  CHECK(fs::exists(dir.path / "shot.ppm"));
  CHECK(fs::exists(dir.path / "shot.pgm"));

  const RunResult frames =
      run("preview --scene " + suite + "/scenes/scene_000.scs --trajectory " + suite +
          "/trajs/scene_000_demo00.traj --out " + (dir.path / "frame").string() + kMicro);
  CHECK(frames.exit_code == 0);
  int count = 0;
  for (const auto& entry : fs::directory_iterator(dir.path))
    if (entry.path().extension() == ".ppm" &&
        entry.path().filename().string().rfind("frame_", 0) == 0)
      ++count;
  CHECK(count == 64);  // one frame per raw trajectory sample
}

TEST_CASE("exit codes distinguish usage errors from runtime failures") {
  TempDir dir("scopesim_cli_exit");
  // unknown flag -> usage error
  CHECK(run("gen-scenes --out x --bogus-flag").exit_code == 2);
  // invalid split -> usage error
  CHECK(run("gen-scenes --out " + (dir.path / "s").string() + " --count 4 --split 9:9")
            .exit_code == 2);
  // unknown config key -> usage error
  CHECK(run("gen-scenes --out " + (dir.path / "s").string() +
            " --count 2 --split 1:1 --set not.a.key=1")
            .exit_code == 2);
  // missing manifest -> usage error (input validation)
  CHECK(run("augment --in " + (dir.path / "missing.manifest").string() + " --out " +
            (dir.path / "aug").string())
            .exit_code == 2);
  // malformed trajectory file -> usage error with a line number
  const std::string suite = (dir.path / "suite").string();
  REQUIRE(run("gen-scenes --out " + suite + " --count 2 --split 1:1 --seed 1" + kMicro)
              .exit_code == 0);
  {
    std::ofstream bad(suite + "/trajs/scene_000_demo00.traj");
    bad << "0.0 1.0 2.0 not-a-number 0 0 0\n";
  }
  const RunResult r = run("augment --in " + suite + "/train.manifest --out " +
                          (dir.path / "aug").string() + kMicro);
  CHECK(r.exit_code == 2);
  CHECK(r.output.find(":1") != std::string::npos);
  // unwritable output -> runtime failure
  CHECK(run("gen-scenes --out /proc/nope --count 2 --split 1:1" + kMicro).exit_code == 1);
  // help exits 0
  CHECK(run("--help").exit_code == 0);
}
