// Copyright 2026 The DTRN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "test_support.hpp"

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string err;
};

Result run(const fs::path& dir, const std::string& args) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(DTRN_CLI) + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::ostringstream os;
  os << in.rdbuf();
  r.err = os.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string l;
  std::getline(in, l);
  return l;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kGen =
    "n_tasks=2\nn_seqs=2\nn_sparse=2\ndim=8\nn_users=80\nn_items=40\nlatent_dim=4\n"
    "task_conflict=1,-0.5;-0.5,1\ntask_behavior_weights=0.5,0;0,0.5\nseq_length_means=3,2\n"
    "n_instances=300\nn_test=200\nseed=5\n";

}  // namespace

TEST_CASE("full command-line workflow") {
  const fs::path dir = dtrn::testing::scratch_dir("cli");
  const std::string d = dir.string();
  write(dir / "gen.cfg", kGen);
  write(dir / "run.cfg", "variant=DTRN\nhead=mmoe\nlr=0.01\nbatch_size=32\nseed=3\n");

  REQUIRE(run(dir, "generate --config " + d + "/gen.cfg --out " + d + "/data").code == 0);
  REQUIRE(run(dir, "generate --config " + d + "/gen.cfg --out " + d + "/data2").code == 0);
  CHECK(slurp(dir / "data/train.jsonl") == slurp(dir / "data2/train.jsonl"));
  CHECK(slurp(dir / "data/test.jsonl") == slurp(dir / "data2/test.jsonl"));

  const std::string train_args = "train --schema " + d + "/data/schema.cfg --data " + d + "/data/train.jsonl --config " +
                                 d + "/run.cfg --out ";
  REQUIRE(run(dir, train_args + d + "/a.ckpt").code == 0);
  REQUIRE(run(dir, train_args + d + "/b.ckpt").code == 0);
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
  CHECK(slurp(dir / "a.ckpt").substr(0, 8) == "DTRN0001");

  REQUIRE(run(dir, "eval --ckpt " + d + "/a.ckpt --data " + d + "/data/test.jsonl --report " + d + "/m.csv").code == 0);
  CHECK(first_line(dir / "m.csv") == "task,auc,logloss,seed,config_hash,wall_time");

  REQUIRE(run(dir, "stats --data " + d + "/data/train.jsonl --out " + d + "/s.csv").code == 0);
  CHECK(first_line(dir / "s.csv") == "task,behavior,avg_count");

  for (const char* kind : {"interest", "bottom"}) {
    REQUIRE(run(dir, "export --ckpt " + d + "/a.ckpt --data " + d + "/data/test.jsonl --kind " + kind + " --out " + d +
                         "/e.csv")
                .code == 0);
    CHECK(first_line(dir / "e.csv").rfind("instance_id,task,behavior,v0", 0) == 0);
  }

  write(dir / "suite.cfg", "data_dir=data\nvariants=baseline,+TIM\nlr=0.01\nbatch_size=64\n");
  REQUIRE(run(dir, "ablate --suite " + d + "/suite.cfg --seeds 1,2 --report " + d + "/abl.csv").code == 0);
  CHECK(first_line(dir / "abl.csv").rfind("variant,head,injection_site,removed,auc_mean_0", 0) == 0);
}

TEST_CASE("errors exit nonzero with a one-line diagnostic") {
  const fs::path dir = dtrn::testing::scratch_dir("cli_err");
  const std::string d = dir.string();
  write(dir / "gen.cfg", kGen);
  write(dir / "bad_gen.cfg", std::string(kGen) + "task_conflict=1,0.9;0.5,1\n");
  write(dir / "bad_run.cfg", "variant=DTRN\nhead=mmoe\nwarp_speed=9\n");
  REQUIRE(run(dir, "generate --config " + d + "/gen.cfg --out " + d + "/data").code == 0);

  const std::vector<std::string> bad{
      "",
      "frobnicate",
      "generate --config " + d + "/missing.cfg --out " + d + "/x",
      "generate --config " + d + "/bad_gen.cfg --out " + d + "/x",
      "train --schema " + d + "/data/schema.cfg --data " + d + "/data/train.jsonl --config " + d +
          "/bad_run.cfg --out " + d + "/c.ckpt",
      "eval --ckpt " + d + "/none.ckpt --data " + d + "/data/test.jsonl --report " + d + "/m.csv",
      "export --ckpt " + d + "/none.ckpt --data " + d + "/data/test.jsonl --kind logits --out " + d + "/e.csv",
      "ablate --suite " + d + "/gen.cfg --seeds 1 --report " + d + "/a.csv",
  };
  for (const auto& args : bad) {
    const Result r = run(dir, args);
    INFO("args: ", args, "\nstderr: ", r.err);
    CHECK(r.code != 0);
    CHECK(!r.err.empty());
  }
  const Result r = run(dir, "train --schema " + d + "/data/schema.cfg --data " + d + "/data/train.jsonl --config " + d +
                                "/bad_run.cfg --out " + d + "/c.ckpt");
  CHECK(r.err.rfind("error: ", 0) == 0);
  CHECK(r.err.find("warp_speed") != std::string::npos);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}
