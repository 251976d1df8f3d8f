// SPDX-License-Identifier: Apache-2.0
#include "cci/pipeline.hpp"

#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

namespace cci {

using nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
  const std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct IniData {
  // section -> key -> value, in file order for hashing stability
  std::map<std::string, std::map<std::string, std::string>> sections;

  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback = "") const {
    auto s = sections.find(section);
    if (s == sections.end()) return fallback;
    auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
  }
  bool has(const std::string& section) const {
    return sections.count(section) > 0;
  }
};

IniData parse_ini(const std::string& text, const std::string& origin) {
  IniData data;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw DataError(origin + ":" + std::to_string(line_no) +
                        ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError(origin + ":" + std::to_string(line_no) +
                      ": expected key = value");
    data.sections[section][trim(line.substr(0, eq))] =
        trim(line.substr(eq + 1));
  }
  return data;
}

double to_double(const std::string& v, const std::string& what) {
  try {
    return std::stod(v);
  } catch (...) {
    throw DataError("bad number for " + what + ": " + v);
  }
}

std::uint64_t to_u64(const std::string& v, const std::string& what) {
  try {
    return std::stoull(v);
  } catch (...) {
    throw DataError("bad integer for " + what + ": " + v);
  }
}

LlmEndpoint endpoint_from_ini(const IniData& ini, const std::string& section,
                              const std::string& default_name) {
  LlmEndpoint e;
  e.name = ini.get(section, "name", default_name);
  e.base_url = ini.get(section, "base_url");
  e.model_id = ini.get(section, "model_id", "default");
  e.api_key_env = ini.get(section, "api_key_env");
  if (const auto v = ini.get(section, "timeout_s"); !v.empty())
    e.timeout_s = to_double(v, section + ".timeout_s");
  if (const auto v = ini.get(section, "max_retries"); !v.empty())
    e.max_retries = static_cast<int>(to_u64(v, section + ".max_retries"));
  if (const auto v = ini.get(section, "backoff_base_s"); !v.empty())
    e.backoff_base_s = to_double(v, section + ".backoff_base_s");
  if (e.timeout_s <= 0) throw DataError(section + ": timeout must be > 0");
  if (e.max_retries < 0) throw DataError(section + ": max_retries must be >= 0");
  return e;
}

}  // namespace

std::string content_hash_hex(const std::string& content) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : content) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

PipelineConfig default_pipeline_config() {
  PipelineConfig cfg;
  cfg.teacher.name = "teacher";
  cfg.fixer.name = "fixer";
  return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) throw DataError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  const IniData ini = parse_ini(text, path);
  PipelineConfig cfg = default_pipeline_config();
  cfg.config_hash = content_hash_hex(text);

  if (const auto v = ini.get("run", "seed"); !v.empty())
    cfg.seed = to_u64(v, "run.seed");
  cfg.shots_path = ini.get("run", "shots");
  cfg.transcript_path = ini.get("run", "transcript");

  for (int i = 1; i <= 3; ++i) {
    const std::string section = "voter." + std::to_string(i);
    if (ini.has(section))
      cfg.voters.push_back(endpoint_from_ini(ini, section, section));
  }
  if (ini.has("teacher"))
    cfg.teacher = endpoint_from_ini(ini, "teacher", "teacher");
  if (ini.has("fixer")) cfg.fixer = endpoint_from_ini(ini, "fixer", "fixer");

  DetectorConfig& d = cfg.detector;
  if (const auto v = ini.get("detector", "embed_dim"); !v.empty())
    d.embed_dim = to_u64(v, "detector.embed_dim");
  if (const auto v = ini.get("detector", "gru_hidden"); !v.empty())
    d.gru_hidden = to_u64(v, "detector.gru_hidden");
  if (const auto v = ini.get("detector", "attention_heads"); !v.empty())
    d.attention_heads = to_u64(v, "detector.attention_heads");
  if (const auto v = ini.get("detector", "lambda"); !v.empty())
    d.lambda = to_double(v, "detector.lambda");
  if (const auto v = ini.get("detector", "epochs"); !v.empty())
    d.epochs = to_u64(v, "detector.epochs");
  if (const auto v = ini.get("detector", "learning_rate"); !v.empty())
    d.learning_rate = to_double(v, "detector.learning_rate");
  if (const auto v = ini.get("detector", "batch_size"); !v.empty())
    d.batch_size = to_u64(v, "detector.batch_size");
  if (const auto v = ini.get("detector", "vocab_cap"); !v.empty())
    d.vocab_cap = to_u64(v, "detector.vocab_cap");
  if (const auto v = ini.get("detector", "prob_clamp"); !v.empty())
    d.prob_clamp = to_double(v, "detector.prob_clamp");
  d.seed = cfg.seed;
  d.validate();

  EnhanceConfig& e = cfg.enhance;
  if (const auto v = ini.get("enhance", "max_iterations"); !v.empty())
    e.max_iterations = to_u64(v, "enhance.max_iterations");
  if (const auto v = ini.get("enhance", "sampling_rate"); !v.empty())
    e.sampling_rate = to_double(v, "enhance.sampling_rate");
  if (const auto v = ini.get("enhance", "convergence_delta"); !v.empty())
    e.convergence_delta = to_double(v, "enhance.convergence_delta");
  if (const auto v = ini.get("enhance", "generations_per_parent"); !v.empty())
    e.generations_per_parent = to_u64(v, "enhance.generations_per_parent");
  e.seed = cfg.seed;
  e.validate();

  KtoParams& k = cfg.kto;
  if (const auto v = ini.get("kto", "beta"); !v.empty())
    k.beta = to_double(v, "kto.beta");
  if (const auto v = ini.get("kto", "lambda_d"); !v.empty())
    k.lambda_d = to_double(v, "kto.lambda_d");
  if (const auto v = ini.get("kto", "lambda_u"); !v.empty())
    k.lambda_u = to_double(v, "kto.lambda_u");
  k.validate();

  LoraPreset& l = cfg.lora;
  if (const auto v = ini.get("lora", "epochs_finetune"); !v.empty())
    l.epochs_finetune = to_u64(v, "lora.epochs_finetune");
  if (const auto v = ini.get("lora", "epochs_alignment"); !v.empty())
    l.epochs_alignment = to_u64(v, "lora.epochs_alignment");
  if (const auto v = ini.get("lora", "batch_finetune"); !v.empty())
    l.batch_finetune = to_u64(v, "lora.batch_finetune");
  if (const auto v = ini.get("lora", "batch_alignment"); !v.empty())
    l.batch_alignment = to_u64(v, "lora.batch_alignment");
  if (const auto v = ini.get("lora", "learning_rate"); !v.empty())
    l.learning_rate = to_double(v, "lora.learning_rate");
  if (const auto v = ini.get("lora", "max_len"); !v.empty())
    l.max_len = to_u64(v, "lora.max_len");
  if (const auto v = ini.get("lora", "rank"); !v.empty())
    l.lora_rank = to_u64(v, "lora.rank");
  if (const auto v = ini.get("lora", "alpha"); !v.empty())
    l.lora_alpha = to_double(v, "lora.alpha");
  if (const auto v = ini.get("lora", "dropout"); !v.empty())
    l.lora_dropout = to_double(v, "lora.dropout");

  return cfg;
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs,
                    const std::string& config_hash, std::uint64_t seed) {
  ordered_json j;
  j["schema_version"] = 1;
  j["tool_version"] = kToolVersion;
  j["command"] = command;
  {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    j["timestamp"] = buf;
  }
  j["config_hash"] = config_hash.empty() ? "defaults" : config_hash;
  j["seed"] = seed;
  auto files = [](const std::vector<std::string>& paths) {
    auto arr = ordered_json::array();
    for (const std::string& p : paths) {
      ordered_json f;
      f["path"] = p;
      std::ifstream in(p, std::ios::binary | std::ios::ate);
      if (in.is_open()) f["bytes"] = static_cast<std::size_t>(in.tellg());
      arr.push_back(std::move(f));
    }
    return arr;
  };
  j["inputs"] = files(inputs);
  j["outputs"] = files(outputs);
  std::ofstream out(path);
  if (!out.is_open()) throw DataError("cannot write manifest: " + path);
  out << j.dump(2) << '\n';
}

// ------------------------------------------------------------------ solve ---

DetectFn detector_fn(std::shared_ptr<const DetectorModel> model) {
  return [model](const CciCase& c) { return predict(*model, c); };
}

std::pair<std::vector<SolveCaseResult>, SolveReport> solve(
    const Corpus& corpus, const DetectFn& detect, Gateway& gateway,
    const LlmEndpoint& fixer_backend, const SolveOptions& opts) {
  using clock = std::chrono::steady_clock;
  std::vector<SolveCaseResult> results;
  results.reserve(corpus.size());
  SolveReport report;
  report.monolithic = opts.monolithic;

  const auto run_start = clock::now();
  for (const CciCase& c : corpus.cases) {
    const auto t0 = clock::now();
    SolveCaseResult r;
    r.case_id = c.id;
    const Prediction pred = detect(c);
    r.probability = pred.probability;
    r.inconsistent = pred.inconsistent;
    if (r.inconsistent) ++report.flagged;
    if (r.inconsistent || opts.monolithic) {
      r.fix = fix_comment(gateway, fixer_backend, c, opts.fix_max_tokens);
      ++report.fixer_calls;
      if (!r.fix->ok()) ++report.fixer_errors;
    }
    r.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    results.push_back(std::move(r));
  }
  report.total_s =
      std::chrono::duration<double>(clock::now() - run_start).count();
  report.n = results.size();

  // warm-up pass excluded from the average; first case reported separately
  if (!results.empty()) {
    report.warmup_s = results.front().seconds;
    if (results.size() > 1) {
      double sum = 0.0;
      for (std::size_t i = 1; i < results.size(); ++i)
        sum += results[i].seconds;
      report.mean_case_s = sum / static_cast<double>(results.size() - 1);
    } else {
      report.mean_case_s = report.warmup_s;
    }
  }
  return {std::move(results), std::move(report)};
}

ordered_json SolveCaseResult::to_json() const {
  ordered_json j;
  j["case_id"] = case_id;
  j["probability"] = probability;
  j["verdict"] = inconsistent ? "inconsistent" : "consistent";
  if (fix) j["fix"] = fix->to_json();
  j["seconds"] = seconds;
  return j;
}

ordered_json SolveReport::to_json() const {
  ordered_json j;
  j["schema_version"] = 1;
  j["n"] = n;
  j["flagged"] = flagged;
  j["fixer_calls"] = fixer_calls;
  j["fixer_errors"] = fixer_errors;
  j["warmup_s"] = warmup_s;
  j["mean_case_s"] = mean_case_s;
  j["total_s"] = total_s;
  j["monolithic"] = monolithic;
  return j;
}

}  // namespace cci
