// End-to-end checks of the command-line driver. The binary under test is
// named by the CMC_CLI environment variable (set by ctest).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* cli = std::getenv("CMC_CLI");
  return cli ? cli : "";
}

int run(const std::string& args) {
  const std::string command = "\"" + cli_path() + "\" " + args + " > cli_stdout.txt 2>cli_stderr.txt";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Workspace {
  fs::path dir;
  Workspace() : dir(fs::temp_directory_path() / "cmc_cli_test") {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("generate writes the instance artifacts") {
  REQUIRE(!cli_path().empty());
  Workspace ws;
  const std::string out = (ws.dir / "gen").string();
  REQUIRE(run("generate --n1 15 --n2 20 --rank 2 --p 0.8 --ceiling 8 --seed 3 --out " + out) == 0);
  for (const char* name : {"m.bin", "train.csv", "val.csv", "test.csv", "instance.json",
                           "resolved_config.json"})
    CHECK(fs::exists(fs::path(out) / name));
  CHECK(read_file(fs::path(out) / "train.csv").rfind("i,j,value\n", 0) == 0);
}

TEST_CASE("dry runs only print the plan") {
  REQUIRE(!cli_path().empty());
  Workspace ws;
  const std::string out = (ws.dir / "dry").string();
  REQUIRE(run("sweep --dry-run --n1 10 --n2 10 --rank 2 --out " + out) == 0);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("config errors exit with code 1") {
  REQUIRE(!cli_path().empty());
  CHECK(run("solve --n1 5 --n2 5 --rank 99") == 1);
  CHECK(run("task2 --dataset-kind movielens --dataset-path nowhere.tsv") == 1);  // missing task.c
}

TEST_CASE("solve honors expectation gates with exit code 3") {
  REQUIRE(!cli_path().empty());
  Workspace ws;
  const fs::path cfg = ws.dir / "cfg.json";
  {
    std::ofstream out(cfg);
    out << R"({
  "out_dir": ")" << (ws.dir / "solve").string() << R"(",
  "synth": {"n1": 15, "n2": 20, "r": 2, "L": 12, "p": 0.9, "C": 8},
  "solver": {"variant": "Fro-CMC", "lambda1": 0.01, "rank_k": 3, "max_iter": 120, "tol": 1e-9},
  "expect": {"max_rel_rmse_all": 1e-9}
})";
  }
  CHECK(run("solve --config " + cfg.string()) == 3);
}

TEST_CASE("task pipeline on a filmtrust-format file produces an 8-bin histogram") {
  REQUIRE(!cli_path().empty());
  Workspace ws;
  // every half-step rating appears, several times, on a 12x10 grid
  const fs::path data = ws.dir / "ft.txt";
  {
    std::ofstream out(data);
    int count = 0;
    for (int u = 1; u <= 12; ++u)
      for (int i = 1; i <= 10; ++i) {
        const double rating = 0.5 * (1 + (u * 7 + i * 3) % 8);
        out << u << " " << i << " " << rating << "\n";
        ++count;
      }
  }
  const fs::path cfg = ws.dir / "task.json";
  {
    std::ofstream out(cfg);
    out << R"({
  "out_dir": ")" << (ws.dir / "t2").string() << R"(",
  "dataset": {"kind": "filmtrust", "path": ")" << data.string() << R"(", "double_ratings": true},
  "task": {"c": 8},
  "seeds": [0],
  "variants": ["Fro-CMC"],
  "grids": {"Fro-CMC": [{"lambda1": 0.1, "rank_k": 3, "max_iter": 40, "tol": 1e-8}]}
})";
  }
  REQUIRE(run("task2 --config " + cfg.string()) == 0);
  const std::string histogram = read_file(ws.dir / "t2" / "ratings_histogram.csv");
  // 8 bins plus the header, counts summing to the number of ratings
  int lines = 0;
  long total = 0;
  std::istringstream in(histogram);
  std::string line;
  std::getline(in, line);
  CHECK(line == "rating,count");
  while (std::getline(in, line)) {
    ++lines;
    total += std::stol(line.substr(line.find(',') + 1));
  }
  CHECK(lines == 8);
  CHECK(total == 120);
  CHECK(fs::exists(ws.dir / "t2" / "task2_summary.csv"));

  // plot data re-emission is byte-for-byte idempotent
  REQUIRE(run("plotdata --run " + (ws.dir / "t2").string()) == 0);
  const std::string fig_a = read_file(ws.dir / "t2" / "fig_task2.csv");
  REQUIRE(run("plotdata --run " + (ws.dir / "t2").string()) == 0);
  CHECK(read_file(ws.dir / "t2" / "fig_task2.csv") == fig_a);
  CHECK(fig_a.rfind("x,y,series\n", 0) == 0);
}

TEST_CASE("plotdata on an empty directory is a runtime error") {
  REQUIRE(!cli_path().empty());
  Workspace ws;
  fs::create_directories(ws.dir / "empty");
  CHECK(run("plotdata --run " + (ws.dir / "empty").string()) == 2);
}
