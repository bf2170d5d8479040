// Command-line front end: circuit validation, marginals, sampling, solving,
// training, alpha cross-validation, benchmark sweeps, and report aggregation.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pcmmap/circuit.hpp"
#include "pcmmap/eval.hpp"
#include "pcmmap/mmap.hpp"
#include "pcmmap/neural.hpp"
#include "pcmmap/qpc.hpp"
#include "pcmmap/rng.hpp"
#include "pcmmap/sampler.hpp"
#include "pcmmap/threads.hpp"

namespace fs = std::filesystem;
using namespace pcmmap;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDomain = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("file not found: " + path);
}

// All outputs go through a temp file + rename so readers never see partials.
void write_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write to " + tmp.string());
    out << content;
  }
  fs::rename(tmp, target);
}

std::string num6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string format_query(const Circuit& c, const Assignment& q) {
  std::string out = "(";
  bool first = true;
  for (const auto& [var, value] : q.entries()) {
    if (!first) out += ",";
    out += c.variables()[var] + "=" + std::to_string(static_cast<int>(value));
    first = false;
  }
  return out + ")";
}

std::uint64_t assignment_fingerprint(const Assignment& a) {
  std::uint64_t h = 0x9E3779B97F4A7C15ull;
  for (const auto& [var, value] : a.entries())
    h = SplitMix64::mix(h ^ (static_cast<std::uint64_t>(var) * 2 + value));
  return h;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

struct SolveInputs {
  Circuit circuit;
  VariablePartition partition;
  Assignment evidence;
};

SolverHandle make_solver(const std::string& name, int iters,
                         std::uint64_t seed,
                         const std::optional<MlpModel>& model) {
  if (name == "bruteforce")
    return {name, [](const MmapProblem& p) { return brute_force_mmap(p, 1); }};
  if (name == "max")
    return {name, [](const MmapProblem& p) { return max_approx(p); }};
  if (name == "ml")
    return {name, [](const MmapProblem& p) { return ml_approx(p); }};
  if (name == "seq")
    return {name, [](const MmapProblem& p) { return seq_approx(p); }};
  if (name == "hillclimb")
    return {name, [iters, seed](const MmapProblem& p) {
              // Per-problem substream keyed on the evidence so results do not
              // depend on sweep order.
              SplitMix64 rng = SplitMix64::substream(
                  seed, assignment_fingerprint(p.evidence));
              Assignment init;
              for (int v : p.partition.query) init.set(v, rng.bernoulli(0.5));
              return hill_climb(p, init, iters, rng.next());
            }};
  if (name == "ssmp") {
    if (!model) throw UsageError("method ssmp needs --model");
    return {name, [m = *model](const MmapProblem& p) {
              return predict_mmap(m, p);
            }};
  }
  throw UsageError("unknown method '" + name + "'");
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Marginal MAP toolkit for smooth decomposable probabilistic "
               "circuits"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "worker threads (default: PCMMAP_THREADS or logical cores)");

  // validate
  auto* cmd_validate = app.add_subcommand("validate", "check circuit properties");
  std::string v_circuit;
  bool v_json = false;
  cmd_validate->add_option("circuit", v_circuit)->required();
  cmd_validate->add_flag("--json", v_json);

  // marginal
  auto* cmd_marginal =
      app.add_subcommand("marginal", "probability of a partial assignment");
  std::string m_circuit, m_assign;
  bool m_json = false;
  cmd_marginal->add_option("circuit", m_circuit)->required();
  cmd_marginal->add_option("--assign", m_assign,
                           "comma-separated NAME=0|1 pairs");
  cmd_marginal->add_flag("--json", m_json);

  // sample
  auto* cmd_sample =
      app.add_subcommand("sample", "draw evidence rows from the circuit");
  std::string s_circuit, s_partition, s_out;
  int s_n = 1000;
  std::uint64_t s_seed = 0;
  cmd_sample->add_option("circuit", s_circuit)->required();
  cmd_sample->add_option("--partition", s_partition)->required();
  cmd_sample->add_option("--n", s_n);
  cmd_sample->add_option("--seed", s_seed);
  cmd_sample->add_option("--out", s_out, "CSV path (default: stdout)");

  // solve
  auto* cmd_solve = app.add_subcommand("solve", "answer one MMAP problem");
  std::string so_circuit, so_problem, so_partition, so_evidence, so_model_path,
      so_method = "bruteforce", so_init = "random", so_out;
  int so_iters = 100;
  std::uint64_t so_seed = 0;
  bool so_json = false;
  cmd_solve->add_option("circuit", so_circuit);
  cmd_solve->add_option("--problem", so_problem, "problem JSON document");
  cmd_solve->add_option("--partition", so_partition);
  cmd_solve->add_option("--evidence", so_evidence, "NAME=0|1 pairs");
  cmd_solve
      ->add_option("--method", so_method)
      ->check(CLI::IsMember({"max", "ml", "seq", "bruteforce", "hillclimb",
                             "ssmp"}));
  cmd_solve->add_option("--model", so_model_path);
  cmd_solve->add_option("--iters", so_iters);
  cmd_solve->add_option("--seed", so_seed);
  cmd_solve
      ->add_option("--init-method", so_init,
                   "hill-climb start: random|max|ml|seq|ssmp")
      ->check(CLI::IsMember({"random", "max", "ml", "seq", "ssmp"}));
  cmd_solve->add_option("--out", so_out, "write solution JSON here");
  cmd_solve->add_flag("--json", so_json);

  // train
  auto* cmd_train = app.add_subcommand("train", "fit the neural optimizer");
  std::string t_circuit, t_partition, t_data, t_out, t_hidden = "32,32",
              t_objective = "ssmp";
  TrainConfig t_cfg;
  int t_label_iters = 1000;
  cmd_train->add_option("circuit", t_circuit)->required();
  cmd_train->add_option("--partition", t_partition)->required();
  cmd_train->add_option("--data", t_data, "evidence CSV")->required();
  cmd_train->add_option("--out", t_out, "model JSON path")->required();
  cmd_train->add_option("--objective", t_objective)
      ->check(CLI::IsMember({"ssmp", "mse", "mae"}));
  cmd_train->add_option("--alpha", t_cfg.alpha);
  cmd_train->add_option("--epochs", t_cfg.epochs);
  cmd_train->add_option("--batch", t_cfg.batch_size);
  cmd_train->add_option("--lr", t_cfg.learning_rate);
  cmd_train->add_option("--lr-decay", t_cfg.lr_decay);
  cmd_train->add_option("--decay-interval", t_cfg.decay_interval);
  cmd_train->add_option("--dropout", t_cfg.dropout_rate);
  cmd_train->add_option("--hidden", t_hidden, "hidden widths, e.g. 64,64");
  cmd_train->add_option("--seed", t_cfg.seed);
  cmd_train->add_option("--label-iters", t_label_iters,
                        "hill-climb iterations for mse/mae label generation");

  // cv-alpha
  auto* cmd_cv = app.add_subcommand("cv-alpha",
                                    "cross-validate the entropy penalty");
  std::string cv_circuit, cv_partition, cv_data, cv_hidden = "32,32",
              cv_grid = "0.01,0.1,1,10,100,1000";
  TrainConfig cv_cfg;
  int cv_folds = 5;
  bool cv_json = false;
  cmd_cv->add_option("circuit", cv_circuit)->required();
  cmd_cv->add_option("--partition", cv_partition)->required();
  cmd_cv->add_option("--data", cv_data)->required();
  cmd_cv->add_option("--grid", cv_grid);
  cmd_cv->add_option("--folds", cv_folds);
  cmd_cv->add_option("--epochs", cv_cfg.epochs);
  cmd_cv->add_option("--batch", cv_cfg.batch_size);
  cmd_cv->add_option("--lr", cv_cfg.learning_rate);
  cmd_cv->add_option("--hidden", cv_hidden);
  cmd_cv->add_option("--seed", cv_cfg.seed);
  cmd_cv->add_flag("--json", cv_json);

  // eval
  auto* cmd_eval =
      app.add_subcommand("eval", "benchmark methods on generated problems");
  std::string e_circuit, e_methods = "max,ml,seq", e_model_path, e_out, e_csv,
              e_mode = "mmap", e_dump_partition;
  double e_qr = 0.5;
  int e_n = 100, e_iters = 100, e_reps = 5;
  std::uint64_t e_seed = 0;
  cmd_eval->add_option("circuit", e_circuit)->required();
  cmd_eval->add_option("--qr", e_qr, "query ratio in (0,1)");
  cmd_eval->add_option("--mode", e_mode)->check(CLI::IsMember({"mpe", "mmap"}));
  cmd_eval->add_option("--n", e_n, "number of problems");
  cmd_eval->add_option("--seed", e_seed);
  cmd_eval->add_option("--methods", e_methods);
  cmd_eval->add_option("--model", e_model_path, "model JSON for ssmp");
  cmd_eval->add_option("--iters", e_iters, "hill-climb iterations");
  cmd_eval->add_option("--timing-reps", e_reps);
  cmd_eval->add_option("--out", e_out, "report JSON path");
  cmd_eval->add_option("--csv", e_csv, "summary CSV path");
  cmd_eval->add_option("--dump-partition", e_dump_partition,
                       "write the generated partition here (for training)");

  // report
  auto* cmd_report =
      app.add_subcommand("report", "contingency table over saved reports");
  std::vector<std::string> r_inputs;
  std::string r_out, r_diff;
  cmd_report->add_option("reports", r_inputs, "report JSON files")->required();
  cmd_report->add_option("--out", r_out, "contingency CSV path");
  cmd_report->add_option("--diff", r_diff,
                         "A,B: per-report percent difference of mean LLs");

  CLI11_PARSE(app, argc, argv);
  set_default_threads(resolve_threads(threads));

  if (cmd_validate->parsed()) {
    require_file(v_circuit);
    std::ifstream in(v_circuit, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    ValidationReport report = validate_text(buf.str());
    if (v_json) {
      std::printf(
          "{\"acyclic\": %s, \"normalized\": %s, \"smooth\": %s, "
          "\"decomposable\": %s}\n",
          report.acyclic.pass ? "true" : "false",
          report.normalized.pass ? "true" : "false",
          report.smooth.pass ? "true" : "false",
          report.decomposable.pass ? "true" : "false");
    } else {
      std::fputs(report.to_string().c_str(), stdout);
    }
    return report.all_pass() ? kExitOk : kExitDomain;
  }

  if (cmd_marginal->parsed()) {
    require_file(m_circuit);
    Circuit c = load_circuit(m_circuit);
    Assignment q = parse_assignment(c, m_assign);
    const double p = marginal(c, q);
    if (m_json)
      std::printf("{\"probability\": %.17g, \"log\": %.17g}\n", p,
                  log_marginal(c, q));
    else
      std::printf("%s\n", num6(p).c_str());
    return kExitOk;
  }

  if (cmd_sample->parsed()) {
    require_file(s_circuit);
    require_file(s_partition);
    Circuit c = load_circuit(s_circuit);
    VariablePartition part = load_partition(c, s_partition);
    EvidenceDataset d = generate_dataset(c, part, s_n, s_seed);
    const std::string csv = dataset_to_csv(d);
    if (s_out.empty())
      std::fputs(csv.c_str(), stdout);
    else
      write_atomic(s_out, csv);
    return kExitOk;
  }

  if (cmd_solve->parsed()) {
    Circuit circuit;
    VariablePartition partition;
    Assignment evidence;
    if (!so_problem.empty()) {
      if (!so_circuit.empty() || !so_partition.empty() || !so_evidence.empty())
        throw UsageError(
            "--problem conflicts with circuit/--partition/--evidence");
      require_file(so_problem);
      LoadedProblem lp = load_problem(so_problem);
      circuit = std::move(lp.circuit);
      partition = std::move(lp.partition);
      evidence = std::move(lp.evidence);
    } else {
      if (so_circuit.empty())
        throw UsageError("solve needs a circuit path or --problem");
      require_file(so_circuit);
      if (so_partition.empty()) throw UsageError("solve needs --partition");
      require_file(so_partition);
      circuit = load_circuit(so_circuit);
      partition = load_partition(circuit, so_partition);
      evidence = parse_assignment(circuit, so_evidence);
    }
    MmapProblem problem = make_problem(circuit, partition, evidence);

    std::optional<MlpModel> model;
    if (!so_model_path.empty()) {
      require_file(so_model_path);
      model = load_model(so_model_path);
    }

    MmapSolution sol;
    if (so_method == "hillclimb") {
      Assignment init;
      if (so_init == "random") {
        SplitMix64 rng = SplitMix64::substream(so_seed, 0x1417);
        for (int v : partition.query) init.set(v, rng.bernoulli(0.5));
      } else {
        init = make_solver(so_init, so_iters, so_seed, model).run(problem).q;
      }
      sol = hill_climb(problem, init, so_iters, so_seed);
    } else {
      sol = make_solver(so_method, so_iters, so_seed, model).run(problem);
    }

    const std::string json = solution_to_json(circuit, sol);
    if (!so_out.empty()) write_atomic(so_out, json);
    if (so_json)
      std::printf("%s\n", json.c_str());
    else
      std::printf("method=%s q=%s score=%s elapsed=%ss\n", sol.method.c_str(),
                  format_query(circuit, sol.q).c_str(),
                  num6(sol.log_score).c_str(), num6(sol.elapsed.count()).c_str());
    return kExitOk;
  }

  if (cmd_train->parsed()) {
    require_file(t_circuit);
    require_file(t_partition);
    require_file(t_data);
    Circuit c = load_circuit(t_circuit);
    VariablePartition part = load_partition(c, t_partition);
    EvidenceDataset data = load_dataset(c, part, t_data);
    t_cfg.hidden_dims = parse_int_list(t_hidden);

    TrainResult result;
    if (t_objective == "ssmp") {
      result = train_ssmp(c, part, data, t_cfg);
    } else {
      ProblemSet ps;
      ps.circuit = &c;
      ps.partition = part;
      ps.source = "train --objective " + t_objective;
      for (int i = 0; i < data.n(); ++i)
        ps.evidences.push_back(data.row_assignment(i));
      const std::vector<LabeledExample> labeled =
          label_with_hill_climb(ps, t_label_iters, t_cfg.seed);
      const SupervisedLoss kind =
          t_objective == "mse" ? SupervisedLoss::MSE : SupervisedLoss::MAE;
      result = train_supervised(c, part, labeled, kind, t_cfg);
    }
    write_atomic(t_out, model_to_json(result.model));
    for (std::size_t e = 0; e < result.history.size(); ++e) {
      const EpochStats& st = result.history[e];
      std::printf(
          "epoch %zu: loss=%s nll=%s grad_norm=%s val_ll=%s skipped=%d\n",
          e + 1, num6(st.mean_loss).c_str(), num6(st.mean_nll).c_str(),
          num6(st.grad_norm).c_str(), num6(st.val_mean_ll).c_str(),
          st.n_skipped);
    }
    return kExitOk;
  }

  if (cmd_cv->parsed()) {
    require_file(cv_circuit);
    require_file(cv_partition);
    require_file(cv_data);
    Circuit c = load_circuit(cv_circuit);
    VariablePartition part = load_partition(c, cv_partition);
    EvidenceDataset data = load_dataset(c, part, cv_data);
    cv_cfg.hidden_dims = parse_int_list(cv_hidden);
    const std::vector<double> grid = parse_double_list(cv_grid);
    AlphaCv cv = cross_validate_alpha(c, part, data, grid, cv_folds, cv_cfg);
    if (cv_json) {
      std::printf("{\"best_alpha\": %.17g, \"scores\": [", cv.best_alpha);
      for (std::size_t i = 0; i < cv.grid.size(); ++i)
        std::printf("%s[%.17g, %.17g]", i ? ", " : "", cv.grid[i],
                    cv.mean_scores[i]);
      std::printf("]}\n");
    } else {
      for (std::size_t i = 0; i < cv.grid.size(); ++i)
        std::printf("alpha=%s mean_val_ll=%s\n", num6(cv.grid[i]).c_str(),
                    num6(cv.mean_scores[i]).c_str());
      std::printf("best alpha: %s\n", num6(cv.best_alpha).c_str());
    }
    return kExitOk;
  }

  if (cmd_eval->parsed()) {
    require_file(e_circuit);
    Circuit c = load_circuit(e_circuit);
    const ProblemMode mode =
        e_mode == "mpe" ? ProblemMode::MPE : ProblemMode::MMAP;
    ProblemSet ps = generate_problems(c, e_qr, mode, e_n, e_seed);
    ps.source = "pcmmap eval " + e_circuit;
    if (!e_dump_partition.empty())
      write_atomic(e_dump_partition, partition_to_json(c, ps.partition));

    std::optional<MlpModel> model;
    if (!e_model_path.empty()) {
      require_file(e_model_path);
      model = load_model(e_model_path);
    }
    std::vector<SolverHandle> methods;
    for (const std::string& name : split_names(e_methods))
      methods.push_back(make_solver(name, e_iters, e_seed, model));

    EvalReport report = compare(methods, ps, e_reps);
    for (const MethodResult& m : report.methods)
      std::printf("%-10s mean_ll=%s stddev=%s mean_time=%ss excluded=%d\n",
                  m.name.c_str(), num6(m.mean_ll).c_str(),
                  num6(m.stddev_ll).c_str(), num6(m.mean_time_s).c_str(),
                  m.n_excluded);
    if (!e_out.empty()) write_atomic(e_out, report_to_json(report));
    if (!e_csv.empty()) write_atomic(e_csv, report_to_csv(report));
    return kExitOk;
  }

  if (cmd_report->parsed()) {
    std::vector<EvalReport> reports;
    for (const std::string& path : r_inputs) {
      require_file(path);
      reports.push_back(load_report(path));
    }
    ContingencyTable table = contingency(reports);
    std::fputs(table.to_text().c_str(), stdout);
    if (!r_out.empty()) write_atomic(r_out, table.to_csv());
    if (!r_diff.empty()) {
      const std::vector<std::string> pair = split_names(r_diff);
      if (pair.size() != 2) throw UsageError("--diff expects A,B");
      for (std::size_t k = 0; k < reports.size(); ++k) {
        double a = 0.0, b = 0.0;
        bool found_a = false, found_b = false;
        for (const MethodResult& m : reports[k].methods) {
          if (m.name == pair[0]) {
            a = m.mean_ll;
            found_a = true;
          }
          if (m.name == pair[1]) {
            b = m.mean_ll;
            found_b = true;
          }
        }
        if (!found_a || !found_b)
          throw UsageError("method missing from report " + r_inputs[k]);
        std::printf("%s: %%diff(%s, %s) = %s\n", r_inputs[k].c_str(),
                    pair[0].c_str(), pair[1].c_str(),
                    num6(percent_diff(a, b)).c_str());
      }
    }
    return kExitOk;
  }

  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDomain;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitDomain;
  }
}
