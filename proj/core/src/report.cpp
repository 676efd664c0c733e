#include <bhsim/report.hpp>

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace bhsim {

namespace {

using Json = nlohmann::ordered_json;

std::string hex(Addr a) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(a));
  return buf;
}

Json opt_hex(const std::optional<Addr>& a) {
  return a ? Json(hex(*a)) : Json(nullptr);
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Json trial_json(const TrialRecord& t, ScenarioId id) {
  Json j;
  j["trial"] = t.trial;
  j["success"] = t.success;
  j["speculated"] = opt_hex(t.speculated);
  j["architectural"] = opt_hex(t.architectural);
  if (id == ScenarioId::SpectreBse) j["history_collision"] = t.history_collision;
  if (id == ScenarioId::BiasScope) j["decoded"] = t.decoded;
  j["noise_injected"] = t.noise_injected;
  j["secret_committed"] = t.secret_committed;
  return j;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ReportError(path, "cannot open for writing");
  out << text;
  out.close();
  if (!out) throw ReportError(path, "write failed");
}

}  // namespace

std::string result_json(const ScenarioResult& r, const ReportOptions& opts) {
  Json j;
  j["schema_version"] = kReportSchemaVersion;
  j["scenario"] = std::string(to_string(r.id));
  j["profile"] = r.profile;
  j["status"] = std::string(to_string(r.status));
  j["reason"] = r.reason;
  j["seed"] = hex(r.seed);
  j["noise"] = r.noise;
  j["trials"] = r.trials;
  j["successes"] = r.successes;
  j["success_rate"] = r.success_rate;
  j["architectural_safety"] = r.architectural_safety;

  if (r.id == ScenarioId::BiasScope) {
    Json b;
    b["secret"] = r.secret;
    b["bit_errors"] = r.bit_errors;
    b["error_rate"] = r.error_rate;
    j["biasscope"] = std::move(b);
  }
  if (!r.threshold_curve.empty()) {
    Json curve = Json::array();
    for (const auto& p : r.threshold_curve) {
      curve.push_back({{"k", p.k},
                       {"init_bias", p.init_taken ? "T" : "NT"},
                       {"history_mode", p.matching_history ? "BH" : "PC"},
                       {"predicted_direction", p.predicted_taken ? "T" : "NT"}});
    }
    j["threshold_curve"] = std::move(curve);
  }
  if (!r.window_curve.empty()) {
    Json curve = Json::array();
    for (const auto& p : r.window_curve) {
      curve.push_back({{"prefix_n", p.prefix_n}, {"leak_observed", p.leak_observed}});
    }
    j["window"] = {{"barrier", r.window_barrier}, {"curve", std::move(curve)}};
  }
  if (r.not_recorded) {
    j["not_recorded"] = {{"flow_a", r.not_recorded->flow_a.hex()},
                         {"flow_b", r.not_recorded->flow_b.hex()},
                         {"after_eviction", r.not_recorded->after_eviction.hex()}};
  }
  if (r.chimera) {
    j["chimera"] = {{"shuffle_never_taken", r.chimera->shuffle_never_taken},
                    {"t0_unchanged", r.chimera->t0_unchanged}};
  }
  if (opts.include_trials) {
    Json trials = Json::array();
    for (const auto& t : r.per_trial) trials.push_back(trial_json(t, r.id));
    j["per_trial"] = std::move(trials);
  }
  return j.dump(2) + "\n";
}

std::string threshold_csv(const std::vector<ThresholdPoint>& points) {
  std::string out = "K,init_bias,history_mode,predicted_direction\n";
  for (const auto& p : points) {
    out += std::to_string(p.k);
    out += p.init_taken ? ",T" : ",NT";
    out += p.matching_history ? ",BH" : ",PC";
    out += p.predicted_taken ? ",T\n" : ",NT\n";
  }
  return out;
}

std::string window_csv(const std::vector<WindowPoint>& points) {
  std::string out = "prefix_n,leak_observed\n";
  for (const auto& p : points) {
    out += std::to_string(p.prefix_n);
    out += p.leak_observed ? ",1\n" : ",0\n";
  }
  return out;
}

std::string summary_text(const ScenarioResult& r) {
  std::ostringstream s;
  s << "scenario  " << to_string(r.id) << "\n"
    << "profile   " << r.profile << "\n"
    << "status    " << to_string(r.status) << "\n";
  if (!r.reason.empty()) s << "reason    " << r.reason << "\n";
  s << "seed      " << hex(r.seed) << "\n"
    << "noise     " << fixed(r.noise, 4) << "\n"
    << "trials    " << r.trials << "\n"
    << "successes " << r.successes << " (" << fixed(r.success_rate, 4) << ")\n"
    << "arch-safe " << (r.architectural_safety ? "yes" : "NO") << "\n";
  if (r.id == ScenarioId::BiasScope) {
    s << "bit errors";
    for (unsigned e : r.bit_errors) s << ' ' << e;
    s << " (rate " << fixed(r.error_rate, 4) << ")\n";
  }
  if (!r.threshold_curve.empty()) {
    s << "threshold curve (K: predicted direction)\n";
    for (bool init : {false, true}) {
      for (bool matching : {true, false}) {
        s << "  " << (init ? "T " : "NT") << ' ' << (matching ? "BH" : "PC")
          << ':';
        for (const auto& p : r.threshold_curve) {
          if (p.init_taken == init && p.matching_history == matching) {
            s << ' ' << (p.predicted_taken ? 'T' : 'N');
          }
        }
        s << "\n";
      }
    }
  }
  if (!r.window_curve.empty()) {
    s << "window sweep (prefix_n: leak)" << (r.window_barrier ? " with barrier" : "")
      << "\n ";
    for (const auto& p : r.window_curve) {
      s << ' ' << p.prefix_n << ':' << (p.leak_observed ? 1 : 0);
    }
    s << "\n";
  }
  if (r.not_recorded) {
    s << "history F_A " << r.not_recorded->flow_a.hex() << "\n"
      << "history F_B " << r.not_recorded->flow_b.hex() << "\n"
      << "history NR  " << r.not_recorded->after_eviction.hex() << "\n";
  }
  if (r.chimera) {
    s << "shuffle never taken " << (r.chimera->shuffle_never_taken ? "yes" : "no")
      << ", T0 unchanged " << (r.chimera->t0_unchanged ? "yes" : "no") << "\n";
  }
  return s.str();
}

std::string state_json(const Simulator& sim) {
  Json j;
  j["profile"] = sim.profile().name;
  Json tables = Json::array();
  for (std::size_t t = 0; t < sim.profile().tage_history_lengths.size(); ++t) {
    tables.push_back({{"history_length", sim.profile().tage_history_lengths[t]},
                      {"occupancy", sim.predictor().occupancy(static_cast<int>(t))},
                      {"entries", Json::array()}});
  }
  sim.predictor().for_each_entry(
      [&](int t, std::uint32_t set, const PredictorEntry& e) {
        Json entry{{"set", set}, {"tag", e.tag}};
        if (e.holds_target) {
          entry["target"] = hex(e.target);
        } else {
          entry["counter"] = e.counter;
        }
        Json aliases = Json::array();
        for (Addr a : e.aliases) aliases.push_back(hex(a));
        entry["aliases"] = std::move(aliases);
        entry["seen_taken"] = e.seen_taken;
        tables[t]["entries"].push_back(std::move(entry));
      });
  j["predictor"] = std::move(tables);
  if (const BstTable* bst = sim.bst()) {
    Json slots = Json::array();
    for (std::uint32_t i = 0; i < bst->size(); ++i) {
      if (const auto& e = bst->slot(i)) {
        slots.push_back({{"slot", i},
                         {"tag", e->tag},
                         {"outcome", to_string(e->last_outcome)},
                         {"biased", e->biased}});
      }
    }
    j["bst"] = std::move(slots);
  }
  return j.dump(2) + "\n";
}

std::vector<std::filesystem::path> emit_report(const ScenarioResult& r,
                                               ReportFormat format,
                                               const std::filesystem::path& dir,
                                               const ReportOptions& opts) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ReportError(dir, ec.message());

  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, const std::string& text) {
    const auto path = dir / name;
    write_file(path, text);
    written.push_back(path);
  };
  if (format != ReportFormat::Csv) put("result.json", result_json(r, opts));
  if (format != ReportFormat::Json) {
    if (r.id == ScenarioId::WindowSweep) {
      put("sweep.csv", window_csv(r.window_curve));
    } else {
      put("sweep.csv", threshold_csv(r.threshold_curve));
    }
  }
  put("summary.txt", summary_text(r));
  return written;
}

}  // namespace bhsim
