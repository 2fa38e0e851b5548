#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("isoconquer-cli-" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = "cd '" + work_dir().string() + "' && '" ISOCONQUER_CLI "' " + args + " >stdout.txt 2>stderr.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(work_dir() / p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("usage and config errors exit with 2 and a failure list") {
  CHECK(run("fit --bogus 1") == 2);
  CHECK(slurp("stderr.txt").find("\"failures\"") != std::string::npos);
  CHECK(run("table1 --experiment coverage") == 2);
  std::ofstream(work_dir() / "bad.ini") << "[grid]\nalpha = 0.5\n";
  CHECK(run("coverage --config bad.ini") == 2);
  CHECK(slurp("stderr.txt").find("bad.ini:2") != std::string::npos);
  CHECK(run("pool --total-n 10 --ms 20") == 2);
  CHECK(run("") != 0);
}

TEST_CASE("fit writes breakpoint,level rows") {
  std::ofstream(work_dir() / "data.csv") << "x,y\n0.1,3\n0.5,1\n0.9,2\n";
  REQUIRE(run("fit --data data.csv --out fit") == 0);
  CHECK(slurp("fit/fit.csv") == "breakpoint,level\n0.1,2\n0.5,2\n1,2\n");
  REQUIRE(run("fit --data data.csv --direction nonincreasing --out fit2") == 0);
  CHECK(slurp("fit2/fit.csv") == "breakpoint,level\n0.1,3\n0.5,1.5\n1,1.5\n");
}

TEST_CASE("rerun from the emitted config reproduces the output") {
  REQUIRE(run("table1 --seed 5 --replicates 20 --ns 40,80 --ms 2,4 --out a --format csv --format json") == 0);
  REQUIRE(run("table1 --config a/config.ini --workers 3 --out b") == 0);
  CHECK(slurp("a/table1-left.csv") == slurp("b/table1-left.csv"));
  CHECK_FALSE(slurp("a/table1-left.csv").empty());
  CHECK(slurp("a/table1-left.json").find("\"seed\": 5") != std::string::npos);
  CHECK(slurp("a/manifest.json").find("config_hash") != std::string::npos);
}

TEST_CASE("failed checks exit with 1") {
  // m = 1 cannot pass the normality gate
  CHECK(run("normality --replicates 20 --ns 50 --ms 1 --out n") == 1);
  CHECK(slurp("stderr.txt").find("\"failures\"") != std::string::npos);
  CHECK(fs::exists(work_dir() / "n" / "normality.csv"));
}

TEST_CASE("cleanup") { fs::remove_all(work_dir()); }
