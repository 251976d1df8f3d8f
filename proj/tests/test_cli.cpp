// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "cci/cli.hpp"
#include "cci/corpus.hpp"
#include "support.hpp"

using namespace cci;
using nlohmann::ordered_json;

namespace {

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("cci");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

struct Workspace {
  std::vector<std::string> files;
  std::string add(const std::string& name) {
    files.push_back(name);
    return name;
  }
  ~Workspace() {
    for (const auto& f : files) {
      std::remove(f.c_str());
      std::remove((f + ".manifest.json").c_str());
    }
  }
};

bool exists(const std::string& path) {
  std::ifstream in(path);
  return in.is_open();
}

std::size_t lines(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

void write_tiny_config(const std::string& path) {
  std::ofstream out(path);
  out << "[run]\nseed = 11\n\n"
      << "[detector]\nembed_dim = 12\ngru_hidden = 8\nattention_heads = 2\n"
      << "epochs = 2\nbatch_size = 8\nlearning_rate = 0.003\n\n"
      << "[enhance]\nmax_iterations = 1\nsampling_rate = 0.5\n"
      << "convergence_delta = -1\n";
}

}  // namespace

TEST_CASE("usage errors exit 1, data errors exit 2") {
  CHECK(run({"no-such-command"}) == 1);
  CHECK(run({"dedup", "--no-such-flag", "x"}) == 1);
  CHECK(run({}) == 1);
  CHECK(run({"dedup", "--in", "missing_file.jsonl", "--out", "x.jsonl"}) == 2);
  CHECK(run({"--version"}) == 0);
}

TEST_CASE("dedup / filter-syntactic round trip through files") {
  Workspace ws;
  const std::string in = ws.add("cli_corpus.jsonl");
  {
    Corpus corpus = testsupport::separable_corpus(8, 3);
    // plant one duplicate pair
    CciCase dup = corpus.cases[0];
    dup.id = "dup-of-0";
    corpus.cases.push_back(dup);
    save_corpus(corpus, in);
  }
  const std::string out = ws.add("cli_dedup.jsonl");
  const std::string report = ws.add("cli_dedup_report.json");
  CHECK(run({"dedup", "--in", in, "--out", out, "--report", report}) == 0);
  CHECK(lines(out) == 8);
  CHECK(exists(report));
  CHECK(exists(out + ".manifest.json"));
  {
    std::ifstream r(report);
    ordered_json j;
    r >> j;
    CHECK(j.at("removed_count") == 1);
  }

  const std::string filtered = ws.add("cli_filtered.jsonl");
  CHECK(run({"filter-syntactic", "--in", out, "--out", filtered}) == 0);
  CHECK(lines(filtered) == 8);  // separable corpus has no trivial changes
}

TEST_CASE("metric subcommand prints a score") {
  CHECK(run({"metric", "gleu", "--src", "the old words", "--cand",
             "the new words", "--ref", "the new words"}) == 0);
  CHECK(run({"metric", "bleu4", "--cand", "a b c d", "--ref", "a b c d"}) == 0);
  CHECK(run({"metric", "nope", "--cand", "x", "--ref", "y"}) == 1);
}

TEST_CASE("train, detect, eval-detect, solve, fix, eval-fix pipeline") {
  Workspace ws;
  const std::string config = ws.add("cli_config.ini");
  write_tiny_config(config);
  const std::string corpus_path = ws.add("cli_train.jsonl");
  const Corpus corpus = testsupport::separable_corpus(40, 7);
  save_corpus(corpus, corpus_path);

  const std::string model = ws.add("cli_model.json");
  const std::string history = ws.add("cli_history.json");
  CHECK(run({"--config", config, "train", "--in", corpus_path, "--model-out",
             model, "--history", history}) == 0);
  CHECK(exists(model));
  CHECK(exists(history));

  const std::string preds = ws.add("cli_preds.jsonl");
  CHECK(run({"detect", "--model", model, "--in", corpus_path, "--out",
             preds}) == 0);
  CHECK(lines(preds) == corpus.size());

  const std::string eval_report = ws.add("cli_evaldetect.json");
  CHECK(run({"eval-detect", "--model", model, "--in", corpus_path, "--out",
             eval_report}) == 0);
  {
    std::ifstream r(eval_report);
    ordered_json j;
    r >> j;
    CHECK(j.contains("f1"));
    CHECK(j.contains("misclassified_ids"));
  }

  // solve with a stub fixer: flagged count must equal fixer calls
  const std::string results = ws.add("cli_solve.jsonl");
  const std::string timing = ws.add("cli_timing.json");
  CHECK(run({"solve", "--model", model, "--in", corpus_path, "--backend",
             "stub:text=Updated comment.", "--out", results, "--timing",
             timing}) == 0);
  std::size_t flagged = 0, fixes = 0;
  {
    std::ifstream r(results);
    std::string line;
    while (std::getline(r, line)) {
      if (line.empty()) continue;
      const auto j = ordered_json::parse(line);
      if (j.at("verdict") == "inconsistent") ++flagged;
      if (j.contains("fix")) ++fixes;
    }
  }
  CHECK(flagged == fixes);
  {
    std::ifstream r(timing);
    ordered_json j;
    r >> j;
    CHECK(j.at("n") == corpus.size());
    CHECK(j.at("flagged") == flagged);
    CHECK(j.at("fixer_calls") == fixes);
  }

  // fix + eval-fix over the corpus (references exist in new_comment)
  const std::string fixes_path = ws.add("cli_fixes.jsonl");
  CHECK(run({"fix", "--in", corpus_path, "--backend",
             "stub:text=Returns the omega result.", "--out", fixes_path}) == 0);
  CHECK(lines(fixes_path) == corpus.size());
  const std::string fix_report = ws.add("cli_evalfix.json");
  const std::string fix_csv = ws.add("cli_evalfix.csv");
  CHECK(run({"eval-fix", "--in", corpus_path, "--fixes", fixes_path, "--out",
             fix_report, "--csv", fix_csv}) == 0);
  {
    std::ifstream r(fix_report);
    ordered_json j;
    r >> j;
    CHECK(j.contains("gleu"));
    CHECK(j.at("per_case").size() == corpus.size());
  }
  CHECK(exists(fix_csv));
}

TEST_CASE("filter-semantic and select-validated with stub voters") {
  Workspace ws;
  const std::string shots = ws.add("cli_shots.json");
  {
    std::ofstream out(shots);
    out << R"([
      {"case": {"id":"s1","comment_type":"summary","old_comment":"a","old_code":"x","new_code":"y"}, "verdict": "consistent"},
      {"case": {"id":"s2","comment_type":"return","old_comment":"a","old_code":"x","new_code":"y"}, "verdict": "inconsistent", "kind": "return_type"},
      {"case": {"id":"s3","comment_type":"param","old_comment":"a","old_code":"x","new_code":"y"}, "verdict": "inconsistent", "kind": "method_signature"},
      {"case": {"id":"s4","comment_type":"summary","old_comment":"a","old_code":"x","new_code":"y"}, "verdict": "inconsistent", "kind": "application_logic"}
    ])";
  }
  const std::string in = ws.add("cli_sem_in.jsonl");
  save_corpus(testsupport::separable_corpus(10, 13), in);
  const std::string out = ws.add("cli_sem_out.jsonl");
  const std::string votes = ws.add("cli_votes.jsonl");
  CHECK(run({"filter-semantic", "--in", in, "--out", out, "--votes", votes,
             "--shots", shots, "--voters", "stub:text=INCONSISTENT",
             "stub:text=INCONSISTENT", "stub:text=CONSISTENT"}) == 0);
  CHECK(lines(out) == 10);   // 2/3 majority keeps every positive
  CHECK(lines(votes) == 5);  // only positives queried

  const std::string selected = ws.add("cli_selected.jsonl");
  CHECK(run({"select-validated", "--votes", votes, "--in", in, "--out",
             selected, "--n", "2", "--seed", "4"}) == 0);
  CHECK(lines(selected) == 0);  // no unanimous verdicts with a dissenting voter
}

TEST_CASE("enhance runs with a stub teacher") {
  Workspace ws;
  const std::string config = ws.add("cli_config2.ini");
  write_tiny_config(config);
  const std::string in = ws.add("cli_enh_in.jsonl");
  save_corpus(testsupport::separable_corpus(12, 17), in);
  const std::string out = ws.add("cli_enh_out.jsonl");
  const std::string history = ws.add("cli_enh_hist.json");
  CHECK(run({"--config", config, "enhance", "--in", in, "--out", out,
             "--teacher", "stub:text=[]", "--history", history}) == 0);
  CHECK(lines(out) >= 12);
  CHECK(exists(history));
}
