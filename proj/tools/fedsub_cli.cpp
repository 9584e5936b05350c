// Copyright 2026 The fedsub Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// fedsub_cli: simulate, serve, client, report, audit.
//
// Every failing run ends with one machine-readable line on stderr:
//   status=<word> exit=<code> reason=<text>
// Exit codes: 0 ok, 1 failed check or protocol error, 2 bad configuration,
// inconclusive audit or scale too large, 3 connection failure.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "fedsub/fedsub.hpp"
#include "fedsub/socket.hpp"

namespace {

using namespace fedsub;

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitConnection = 3;

struct RunConfig {
  std::size_t n = 2;
  std::size_t r = 2;
  std::uint64_t s = 4;
  std::uint64_t q = 65537;
  std::uint64_t iterations = 3;
  Scheme scheme = Scheme::kProposed;
  std::uint64_t seed = 1;
  TrainerKind trainer = TrainerKind::kPseudorandom;
  bool socket = false;
  std::string endpoints;
  bool tsv = false;

  // Subcommand extras.
  std::size_t d = 0;  // 1-based on the command line, 0 = schedule
  std::size_t db = 1;
  std::uint16_t port = 0;
  std::string host = "127.0.0.1";
  std::uint64_t sessions = 0;
  std::string mode = "ledger";
  ViewScope scope = ViewScope::kFull;
  Variant variant = Variant::kFaithful;
  std::uint64_t budget = kDefaultEnumerationBudget;
  bool grid = false;
};

// A verdict that is not an exception: the run worked but a check did not.
struct Verdict {
  int code = kExitOk;
  std::string status = "pass";
  std::string reason;
};

std::string final_line(const std::string& status, int code, const std::string& reason) {
  std::string flat = reason;
  for (char& c : flat) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return "status=" + status + " exit=" + std::to_string(code) + " reason=" + flat;
}

// Aligned text or TSV.
class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
  void row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }

  void print(std::ostream& os, bool tsv) const {
    if (tsv) {
      print_tsv(os, header_);
      for (const auto& r : rows_) print_tsv(os, r);
      return;
    }
    std::vector<std::size_t> width(header_.size(), 0);
    auto widen = [&](const std::vector<std::string>& r) {
      for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    };
    widen(header_);
    for (const auto& r : rows_) widen(r);
    auto line = [&](const std::vector<std::string>& r) {
      std::string out;
      for (std::size_t c = 0; c < r.size(); ++c) {
        out += r[c];
        if (c + 1 < r.size()) out += std::string(width[c] - r[c].size() + 2, ' ');
      }
      os << out << "\n";
    };
    line(header_);
    for (const auto& r : rows_) line(r);
  }

 private:
  static void print_tsv(std::ostream& os, const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "\t" : "") << r[c];
    os << "\n";
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string str(std::uint64_t v) { return std::to_string(v); }

ProtocolConfig protocol_config(const RunConfig& rc) { return ProtocolConfig::make(rc.n, rc.r, rc.s, rc.q); }

SimulationOptions sim_options(const RunConfig& rc) {
  SimulationOptions o;
  o.scheme = rc.scheme;
  o.seed = rc.seed;
  o.trainer = rc.trainer;
  return o;
}

std::vector<Endpoint> endpoints_for(const RunConfig& rc) {
  if (rc.endpoints.empty()) throw ConfigError("socket mode needs --endpoints or FEDSUB_ENDPOINTS");
  auto eps = parse_endpoints(rc.endpoints);
  if (eps.size() != rc.n) {
    throw ConfigError("expected " + str(rc.n) + " endpoints, got " + str(eps.size()));
  }
  return eps;
}

std::size_t chosen_index(const RunConfig& rc) {
  if (rc.d == 0) return 0;
  if (rc.d > rc.r) throw ConfigError("--d must be in [1, " + str(rc.r) + "]");
  return rc.d - 1;
}

const std::vector<std::string> kLedgerColumns{"t",        "d",        "download_shares", "download_pir",
                                              "upload_shares", "upload_combos", "download", "upload",
                                              "overall",  "trainer_calls", "codec_ops"};

std::vector<std::string> ledger_cells(const std::string& t, const std::string& d, const OverheadLedger& l) {
  const auto& p = l.total;
  return {t,
          d,
          str(p.download_shares),
          str(p.download_pir),
          str(p.upload_shares),
          str(p.upload_combos),
          str(l.download()),
          str(l.upload()),
          str(l.overall()),
          str(l.trainer_calls),
          str(l.codec.encodes + l.codec.decodes)};
}

std::vector<std::string> expected_cells(const RunConfig& rc, std::uint64_t iterations) {
  const auto f = closed_form(rc.n, rc.r, rc.s, rc.scheme);
  const auto k = iterations;
  return {"expected",
          "-",
          str(f.download_shares * k),
          str(f.download_pir * k),
          str(f.upload_shares * k),
          str(f.upload_combos * k),
          str(f.download * k),
          str(f.upload * k),
          str(f.overall * k),
          str(f.trainer_calls * k),
          str(f.codec_ops * k)};
}

Verdict ledger_verdict(const RunConfig& rc, const std::vector<IterationResult>& history, const OverheadLedger& total) {
  for (const auto& it : history) {
    const auto rep = assert_ledger(it.ledger, rc.n, rc.r, rc.s, rc.scheme);
    if (!rep.pass()) return {kExitFail, "fail", "iteration " + str(it.iteration) + ": " + rep.failure()};
  }
  const auto rep = assert_ledger(total, rc.n, rc.r, rc.s, rc.scheme, history.size());
  if (!rep.pass()) return {kExitFail, "fail", "total: " + rep.failure()};
  return {kExitOk, "pass", "ledger matches closed form"};
}

// ---------------------------------------------------------------------------

Verdict cmd_simulate(const RunConfig& rc) {
  const auto cfg = protocol_config(rc);
  const auto opt = sim_options(rc);
  std::unique_ptr<SocketCarrier> carrier;
  std::unique_ptr<Simulation> sim;
  if (rc.socket) {
    carrier = std::make_unique<SocketCarrier>(endpoints_for(rc));
    sim = std::make_unique<Simulation>(cfg, opt, *carrier);
  } else {
    sim = std::make_unique<Simulation>(cfg, opt);
  }
  bool model_ok = true;
  for (std::uint64_t k = 0; k < rc.iterations; ++k) {
    if (rc.d) {
      sim->step(chosen_index(rc));
    } else {
      sim->step();
    }
    if (!rc.socket && (!sim->replicated() || sim->demasked() != sim->reference())) model_ok = false;
  }
  Table t(kLedgerColumns);
  for (const auto& it : sim->history()) t.row(ledger_cells(str(it.iteration), str(it.chosen + 1), it.ledger));
  t.row(ledger_cells("total", "-", sim->ledger()));
  t.row(expected_cells(rc, rc.iterations));
  t.print(std::cout, rc.tsv);
  Verdict v = ledger_verdict(rc, sim->history(), sim->ledger());
  if (v.code == kExitOk && !model_ok) v = {kExitFail, "fail", "model state diverged from the plaintext reference"};
  return v;
}

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

Verdict cmd_serve(const RunConfig& rc) {
  const auto cfg = protocol_config(rc);
  if (rc.db < 1 || rc.db > rc.n) throw ConfigError("--db must be in [1, " + str(rc.n) + "]");
  auto all = DatabaseServer::create_all(cfg, initial_params(cfg, rc.seed), rc.scheme);
  DatabaseServer db = all[rc.db - 1];
  SocketServer server(db, rc.port, rc.host);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.start(rc.sessions);
  std::cout << "listening db=" << rc.db << " host=" << rc.host << " port=" << server.port() << std::endl;
  while (!g_stop && (rc.sessions == 0 || server.sessions_completed() < rc.sessions)) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  server.stop();
  std::cout << "stopped db=" << rc.db << " sessions=" << server.sessions_completed()
            << " iteration=" << db.state().encoded.iteration << std::endl;
  return {kExitOk, "pass", "served " + str(server.sessions_completed()) + " session(s)"};
}

Verdict cmd_client(const RunConfig& rc) {
  const auto cfg = protocol_config(rc);
  SocketCarrier carrier(endpoints_for(rc));
  Channel channel(carrier);
  auto trainer = make_trainer(rc.trainer, seeds::trainer(rc.seed));
  const std::size_t d = chosen_index(rc);
  IterationResult res;
  if (rc.scheme == Scheme::kProposed) {
    res = LocalMachine(cfg, *trainer).run_iteration(d, channel, seeds::machine(rc.seed));
  } else {
    res = NaiveMachine(cfg, *trainer).run_iteration(d, channel);
  }
  Table t(kLedgerColumns);
  t.row(ledger_cells(str(res.iteration), str(d + 1), res.ledger));
  t.row(expected_cells(rc, 1));
  t.print(std::cout, rc.tsv);
  return ledger_verdict(rc, {res}, res.ledger);
}

// One iteration, measured, for the report's numeric columns.
OverheadLedger measure(const RunConfig& rc, Scheme scheme) {
  SimulationOptions o = sim_options(rc);
  o.scheme = scheme;
  Simulation sim(protocol_config(rc), o);
  return sim.step().ledger;
}

Verdict cmd_report(const RunConfig& rc) {
  std::vector<RunConfig> configs;
  if (rc.grid) {
    for (std::size_t n : {2u, 3u}) {
      for (std::size_t r : {2u, 3u, 4u}) {
        RunConfig c = rc;
        c.n = n;
        c.r = r;
        c.s = checked_pow(n, r);
        configs.push_back(c);
      }
    }
  } else {
    protocol_config(rc);  // validates, suggesting a valid s
    configs.push_back(rc);
  }
  Table t({"N", "r", "s", "row", "proposed_formula", "proposed", "proposed_measured", "naive_formula", "naive",
           "naive_measured"});
  bool ok = true;
  for (const auto& c : configs) {
    const auto p = closed_form(c.n, c.r, c.s, Scheme::kProposed);
    const auto nv = closed_form(c.n, c.r, c.s, Scheme::kNaive);
    const auto mp = measure(c, Scheme::kProposed);
    const auto mn = measure(c, Scheme::kNaive);
    const std::string N = str(c.n), r = str(c.r), s = str(c.s);
    auto computation = [](std::uint64_t calls, std::uint64_t codec) {
      return str(calls) + " train + " + str(codec) + " codec";
    };
    t.row({N, r, s, "computation", "1 train + 2 codec", computation(p.trainer_calls, p.codec_ops),
           computation(mp.trainer_calls, mp.codec.encodes + mp.codec.decodes), "r train",
           computation(nv.trainer_calls, 0), computation(mn.trainer_calls, 0)});
    t.row({N, r, s, "download", "r+(2+beta)s", str(p.download), str(mp.download()), "rs", str(nv.download),
           str(mn.download())});
    t.row({N, r, s, "upload", "rsN+r+s", str(p.upload), str(mp.upload()), "rsN", str(nv.upload),
           str(mn.upload())});
    t.row({N, r, s, "overall", "2r+(3+beta+rN)s", str(p.overall), str(mp.overall()), "rs(N+1)", str(nv.overall),
           str(mn.overall())});
    ok = ok && assert_ledger(mp, c.n, c.r, c.s, Scheme::kProposed).pass() &&
         assert_ledger(mn, c.n, c.r, c.s, Scheme::kNaive).pass();
  }
  t.print(std::cout, rc.tsv);
  if (!ok) return {kExitFail, "fail", "a measured ledger differs from its closed form"};
  return {kExitOk, "pass", "report for " + str(configs.size()) + " configuration(s)"};
}

const char* scope_name(ViewScope s) { return s == ViewScope::kFull ? "full" : "without-shares"; }

std::vector<std::size_t> schedule(const RunConfig& rc, std::uint64_t count) {
  std::vector<std::size_t> out;
  for (std::uint64_t t = 1; t <= count; ++t) {
    out.push_back(rc.d ? chosen_index(rc) : scheduled_choice(rc.seed, t, rc.r));
  }
  return out;
}

Verdict audit_ledger(const RunConfig& rc) {
  Simulation sim(protocol_config(rc), sim_options(rc));
  sim.run(rc.iterations);
  const auto rep = assert_ledger(sim.ledger(), rc.n, rc.r, rc.s, rc.scheme, rc.iterations);
  Table t({"phase", "expected", "measured", "ok"});
  for (const auto& l : rep.lines) t.row({l.phase, str(l.expected), str(l.measured), l.ok() ? "yes" : "no"});
  t.print(std::cout, rc.tsv);
  return ledger_verdict(rc, sim.history(), sim.ledger());
}

Verdict audit_privacy(const RunConfig& rc) {
  const auto setup = AuditSetup::make(rc.n, rc.r, rc.s, rc.q, rc.seed, rc.variant, rc.scope);
  const auto prefix = schedule(rc, rc.iterations - 1);
  Table t({"db", "d_a", "d_b", "support_a", "support_b", "tuples_per_choice", "identical"});
  bool identical = true;
  std::string detail;
  for (std::size_t a = 0; a < rc.r; ++a) {
    for (std::size_t b = a + 1; b < rc.r; ++b) {
      const auto v = view_distribution_equality(setup, a, b, prefix, rc.budget);
      for (std::size_t i = 0; i < rc.n; ++i) {
        t.row({str(i + 1), str(a + 1), str(b + 1), str(v.support_a[i]), str(v.support_b[i]), str(v.tuples_per_choice),
               v.identical ? "yes" : "no"});
      }
      if (!v.identical && identical) detail = v.detail;
      identical = identical && v.identical;
    }
  }
  t.print(std::cout, rc.tsv);
  const std::string where = std::string("scope=") + scope_name(rc.scope);
  if (!identical) return {kExitFail, "fail", "view distributions differ (" + where + "): " + detail};
  return {kExitOk, "pass", "view distributions identical for every pair (" + where + ")"};
}

Verdict audit_witness(const RunConfig& rc) {
  const auto setup = AuditSetup::make(rc.n, rc.r, rc.s, rc.q, rc.seed, rc.variant, rc.scope);
  SimulationOptions opt;
  opt.seed = rc.seed;
  opt.variant = rc.variant;
  opt.record_views = true;
  Simulation sim(setup.cfg, opt);
  const auto choices = schedule(rc, rc.iterations);
  for (auto d : choices) sim.step(d);
  Table t({"db", "d_true", "d_alt", "status", "candidates"});
  int none = 0, inconclusive = 0;
  for (std::size_t i = 0; i < rc.n; ++i) {
    for (std::size_t alt = 0; alt < rc.r; ++alt) {
      const auto w = witness_search(setup, i, sim.views(i, rc.scope), alt, rc.budget);
      t.row({str(i + 1), str(choices.back() + 1), str(alt + 1), witness_status_name(w.status), str(w.candidates)});
      none += w.status == WitnessStatus::kNone;
      inconclusive += w.status == WitnessStatus::kInconclusive;
    }
  }
  t.print(std::cout, rc.tsv);
  const std::string where = std::string(" (scope=") + scope_name(rc.scope) + ")";
  if (none) return {kExitFail, "fail", str(none) + " (db, d_alt) pair(s) without a witness" + where};
  if (inconclusive) return {kExitConfig, "inconclusive", str(inconclusive) + " search(es) hit the budget" + where};
  return {kExitOk, "pass", "witness found for every database and every d_alt" + where};
}

Verdict cmd_audit(const RunConfig& rc) {
  if (rc.iterations < 1) throw ConfigError("--T must be at least 1");
  if (rc.mode == "ledger") return audit_ledger(rc);
  if (rc.mode == "privacy") return audit_privacy(rc);
  return audit_witness(rc);
}

template <typename E>
std::map<std::string, E> choices_of(std::initializer_list<std::pair<const std::string, E>> il) {
  return std::map<std::string, E>(il);
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig rc;
  CLI::App app{"Private federated submodel learning: simulator, database service, client, reports and audits."};
  app.require_subcommand(1);
  app.footer(
      "Ledger TSV columns (simulate, client): t d download_shares download_pir upload_shares upload_combos\n"
      "  download upload overall trainer_calls codec_ops. Counts are field symbols; the 'expected' row is the\n"
      "  closed form. Report columns: N r s row proposed_formula proposed proposed_measured naive_formula naive\n"
      "  naive_measured. Indices --d and --db are 1-based. Config files hold flat key=value lines using the\n"
      "  long option names (N=2, scheme=naive, ...); command-line flags override them.\n"
      "Exit codes: 0 ok, 1 failed check or protocol error, 2 configuration error, inconclusive audit or\n"
      "  scale too large, 3 connection failure. Failures end with 'status=... exit=... reason=...' on stderr.");
  app.set_config("--config", "", "flat key=value file with RunConfig keys");

  app.add_option("--N", rc.n, "number of databases")->capture_default_str();
  app.add_option("--r", rc.r, "number of submodels")->capture_default_str();
  app.add_option("--s", rc.s, "submodel length, a multiple of N^r")->capture_default_str();
  auto* q_opt = app.add_option("--q", rc.q, "field prime")->capture_default_str();
  auto* t_opt = app.add_option("--T", rc.iterations, "iterations (privacy audit default: 1)")->capture_default_str();
  app.add_option("--scheme", rc.scheme, "proposed|naive")
      ->transform(CLI::CheckedTransformer(choices_of<Scheme>({{"proposed", Scheme::kProposed},
                                                              {"naive", Scheme::kNaive}})))
      ->capture_default_str();
  app.add_option("--seed", rc.seed, "64-bit run seed")->capture_default_str();
  app.add_option("--trainer", rc.trainer, "pseudorandom|least-squares")
      ->transform(CLI::CheckedTransformer(choices_of<TrainerKind>(
          {{"pseudorandom", TrainerKind::kPseudorandom}, {"least-squares", TrainerKind::kQuantizedLeastSquares}})));
  std::string carrier = "sim";
  app.add_option("--carrier", carrier, "sim|socket")->check(CLI::IsMember({"sim", "socket"}))->capture_default_str();
  app.add_option("--endpoints", rc.endpoints, "host:port,... one per database, in database order")
      ->envname("FEDSUB_ENDPOINTS");
  std::string format = "table";
  app.add_option("--format", format, "table|tsv")->check(CLI::IsMember({"table", "tsv"}))->capture_default_str();
  app.add_option("--d", rc.d, "chosen submodel, 1-based (default: seeded schedule; client: 1)");

  auto* simulate = app.add_subcommand("simulate", "run T iterations and compare the ledger with the closed form");
  auto* serve = app.add_subcommand("serve", "host one database on a TCP port");
  serve->add_option("--db", rc.db, "database index, 1-based")->capture_default_str();
  serve->add_option("--port", rc.port, "TCP port, 0 for ephemeral")->capture_default_str();
  serve->add_option("--host", rc.host, "bind address")->capture_default_str();
  serve->add_option("--sessions", rc.sessions, "stop after this many sessions, 0 to run until signalled");
  auto* client = app.add_subcommand("client", "run one iteration against N endpoints");
  auto* report = app.add_subcommand("report", "overhead table: formulas, closed forms and measured values");
  report->add_flag("--grid", rc.grid, "N in {2,3} x r in {2,3,4} with s = N^r");
  auto* audit = app.add_subcommand("audit", "ledger, privacy-by-enumeration or witness audit");
  audit->add_option("--mode", rc.mode, "ledger|privacy|witness")
      ->check(CLI::IsMember({"ledger", "privacy", "witness"}))
      ->capture_default_str();
  audit->add_option("--scope", rc.scope, "full|without-shares: whether the stored exclusive share is in the view")
      ->transform(CLI::CheckedTransformer(choices_of<ViewScope>(
          {{"full", ViewScope::kFull}, {"without-shares", ViewScope::kWithoutShares}})));
  audit->add_option("--variant", rc.variant, "faithful|unmasked|constant-alpha (negative controls)")
      ->transform(CLI::CheckedTransformer(choices_of<Variant>({{"faithful", Variant::kFaithful},
                                                               {"unmasked", Variant::kUnmaskedUpload},
                                                               {"constant-alpha", Variant::kConstantAlpha}})));
  audit->add_option("--budget", rc.budget, "enumeration budget in runs")->capture_default_str();
  for (auto* sub : {simulate, serve, client, report, audit}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << final_line("config", kExitConfig, e.what()) << "\n";
    return kExitConfig;
  }
  rc.socket = carrier == "socket";
  rc.tsv = format == "tsv";

  Verdict v;
  try {
    if (simulate->parsed()) {
      v = cmd_simulate(rc);
    } else if (serve->parsed()) {
      v = cmd_serve(rc);
    } else if (client->parsed()) {
      v = cmd_client(rc);
    } else if (report->parsed()) {
      v = cmd_report(rc);
    } else {
      // Enumeration needs a tiny field, and exact privacy enumeration one
      // iteration; these are the defaults unless given.
      if (rc.mode != "ledger" && q_opt->count() == 0) rc.q = 3;
      if (rc.mode == "privacy" && t_opt->count() == 0) rc.iterations = 1;
      v = cmd_audit(rc);
    }
  } catch (const ScaleTooLarge& e) {
    v = {kExitConfig, "scale-too-large", e.what()};
  } catch (const ConfigError& e) {
    v = {kExitConfig, "config", e.what()};
  } catch (const FieldError& e) {
    v = {kExitConfig, "config", e.what()};
  } catch (const TransportError& e) {
    v = {kExitConnection, "connection", e.what()};
  } catch (const Error& e) {
    v = {kExitFail, "protocol", e.what()};
  }
  std::cout.flush();
  if (v.code == kExitOk) {
    std::cout << final_line(v.status, v.code, v.reason) << std::endl;
  } else {
    std::cerr << final_line(v.status, v.code, v.reason) << std::endl;
  }
  return v.code;
}
