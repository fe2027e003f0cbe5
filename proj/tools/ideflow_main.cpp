// Command-line front end. Subcommands:
//   simulate <instance> [--horizon R] [--max-phases N] [--mode ...]
//            [--out trace.json] [--csv trace.csv]   run the simulator,
//            print a run report as JSON, optionally write the trace
//   verify   <instance> <trace> [--claim-termination R]   certify a trace
//   analyze  <trace> --detect-period P --from R   look for a repeating state
//   gen      <name|random> [--seed S] [--out f.json]   emit an instance
//   list     print the builtin instance names
//
// Exit codes: 0 success, 1 verification failure, 2 usage/parse errors,
// 3 when a configured work cap stopped the run. All regular output is
// JSON on stdout; diagnostics go to stderr. Outputs are byte-identical
// across reruns with identical inputs and flags. The environment variable
// IDE_FLOW_THREADS caps internal workers (a value of 1 forces the serial
// path).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ideflow/engine.hpp"
#include "ideflow/instances.hpp"
#include "ideflow/verify.hpp"

namespace {

using Json = nlohmann::ordered_json;
using namespace ideflow;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write '" + path + "'");
    out << text;
}

Instance load_instance(const std::string& path) {
    return Instance::from_json_text(read_file(path));
}

bool serial_requested() {
    const char* env = std::getenv("IDE_FLOW_THREADS");
    if (env == nullptr) return false;
    try {
        return std::stol(env) <= 1;
    } catch (const std::exception&) {
        return false;
    }
}

int run_simulate(const std::string& inst_path, const std::string& horizon,
                 long long max_phases, const std::string& mode, const std::string& out_path,
                 const std::string& csv_path) {
    const Instance inst = load_instance(inst_path);
    EngineConfig cfg;
    cfg.horizon = Rat::parse(horizon);
    cfg.max_phases = max_phases;
    if (mode == "waterfill")
        cfg.mode = EngineMode::SingleSinkWaterfill;
    else if (mode == "thinflow")
        cfg.mode = EngineMode::MultiCommodityThinFlow;
    if (serial_requested()) cfg.thinflow_parallel = false;

    const SimulationReport rep = simulate(inst, cfg);
    if (!out_path.empty()) write_file(out_path, rep.trace.to_json_text());
    if (!csv_path.empty()) write_file(csv_path, rep.trace.to_csv());

    Json j;
    j["outcome"] = outcome_kind_name(rep.outcome);
    j["at"] = rep.at.str();
    j["phases"] = rep.trace.phases().size();
    if (rep.certificate) {
        Json c;
        c["theta"] = rep.certificate->theta.str();
        c["gamma"] = rep.certificate->gamma.str();
        if (rep.certificate->bound) c["bound"] = rep.certificate->bound->str();
        j["certificate"] = c;
    } else {
        j["certificate"] = nullptr;
    }
    if (!out_path.empty()) j["trace_file"] = out_path;
    if (!csv_path.empty()) j["csv_file"] = csv_path;
    std::cout << j.dump(2) << "\n";
    return rep.outcome == OutcomeKind::PhaseCapReached ? 3 : 0;
}

int run_verify(const std::string& inst_path, const std::string& trace_path,
               const std::string& claim) {
    const Instance inst = load_instance(inst_path);
    const FlowTrace trace = FlowTrace::from_json_text(inst, read_file(trace_path));
    const Verdict feasible = verify_feasible(inst, trace);
    const Verdict ide = verify_ide(inst, trace);
    bool all = feasible.pass() && ide.pass();
    Json j;
    j["feasible"] = feasible.to_json();
    j["ide"] = ide.to_json();
    if (!claim.empty()) {
        const Verdict term = verify_termination(inst, trace, Rat::parse(claim));
        j["termination"] = term.to_json();
        all = all && term.pass();
    }
    j["pass"] = all;
    std::cout << j.dump(2) << "\n";
    return all ? 0 : 1;
}

/// A trace file is self-describing for state-recurrence analysis: the
/// recorded functions are compared against their own shifts, so only the
/// identifiers have to resolve. A shell instance carrying exactly the ids
/// mentioned in the file stands in for the real one.
Instance shell_instance_for(const nlohmann::json& j) {
    std::set<std::string> edge_ids;
    std::set<std::string> commodity_ids;
    std::set<std::string> node_ids;
    if (j.contains("inflows"))
        for (const auto& entry : j.at("inflows")) {
            edge_ids.insert(entry.at("edge").get<std::string>());
            commodity_ids.insert(entry.at("commodity").get<std::string>());
        }
    if (j.contains("queues"))
        for (const auto& entry : j.at("queues"))
            edge_ids.insert(entry.at("edge").get<std::string>());
    if (j.contains("phases"))
        for (const auto& jp : j.at("phases"))
            for (const auto& je : jp.at("events")) {
                if (je.contains("edge")) edge_ids.insert(je.at("edge").get<std::string>());
                if (je.contains("commodity"))
                    commodity_ids.insert(je.at("commodity").get<std::string>());
                if (je.contains("node")) node_ids.insert(je.at("node").get<std::string>());
            }
    Instance inst;
    inst.nodes.assign(node_ids.begin(), node_ids.end());
    while (inst.nodes.size() < 2) {
        std::string pad = "shell";
        while (node_ids.count(pad)) pad += "#";
        node_ids.insert(pad);
        inst.nodes.push_back(pad);
    }
    for (const auto& id : edge_ids) {
        Edge e;
        e.id = id;
        e.tail = 0;
        e.head = 1;
        e.tau = 1;
        e.nu = 1;
        inst.edges.push_back(e);
    }
    for (const auto& id : commodity_ids) {
        Commodity c;
        c.id = id;
        c.source = 0;
        c.sink = 1;
        inst.commodities.push_back(c);
    }
    inst.finalize();
    return inst;
}

int run_analyze(const std::string& trace_path, const std::string& period,
                const std::string& from) {
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(read_file(trace_path));
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("malformed trace JSON: ") + ex.what());
    }
    const Instance shell = shell_instance_for(parsed);
    const FlowTrace trace = FlowTrace::from_json(shell, parsed);
    const auto found = detect_periodicity(trace, Rat::parse(from), Rat::parse(period));
    Json j;
    if (found) {
        j["period"] = found->period.str();
        j["start"] = found->start.str();
    } else {
        j["period"] = nullptr;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int run_gen(const std::string& name, unsigned seed, const std::string& out_path) {
    const Instance inst = name == "random" ? make_random(seed, RandomParams{})
                                           : make_builtin(name);
    if (out_path.empty()) {
        std::cout << inst.to_json_text();
        return 0;
    }
    write_file(out_path, inst.to_json_text());
    Json j;
    j["name"] = name;
    j["file"] = out_path;
    j["nodes"] = inst.nodes.size();
    j["edges"] = inst.edges.size();
    j["commodities"] = inst.commodities.size();
    std::cout << j.dump(2) << "\n";
    return 0;
}

int run_list() {
    Json j = Json::array();
    for (const auto& name : builtin_names()) j.push_back(name);
    std::cout << j.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exact simulator, solver and verifier for dynamic equilibrium flows"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "run the phase-extension simulation");
    std::string sim_inst;
    std::string sim_horizon = "100";
    long long sim_max_phases = 100000;
    std::string sim_mode = "auto";
    std::string sim_out;
    std::string sim_csv;
    sim->add_option("instance", sim_inst, "instance JSON file")->required();
    sim->add_option("--horizon", sim_horizon, "simulate on [0, R] (rational)");
    sim->add_option("--max-phases", sim_max_phases, "stop after N phases");
    sim->add_option("--mode", sim_mode, "rate solver")
        ->check(CLI::IsMember({"auto", "waterfill", "thinflow"}));
    sim->add_option("--out", sim_out, "write the trace JSON here");
    sim->add_option("--csv", sim_csv, "write the trace as long-format CSV here");

    auto* ver = app.add_subcommand("verify", "certify a recorded trace");
    std::string ver_inst;
    std::string ver_trace;
    std::string ver_claim;
    ver->add_option("instance", ver_inst, "instance JSON file")->required();
    ver->add_option("trace", ver_trace, "trace JSON file")->required();
    ver->add_option("--claim-termination", ver_claim,
                    "also check an emptiness claim at this time (rational)");

    auto* ana = app.add_subcommand("analyze", "look for a repeating network state");
    std::string ana_trace;
    std::string ana_period;
    std::string ana_from;
    ana->add_option("trace", ana_trace, "trace JSON file")->required();
    ana->add_option("--detect-period", ana_period, "largest period to try (rational)")
        ->required();
    ana->add_option("--from", ana_from, "start of the search window (rational)")->required();

    auto* gen = app.add_subcommand("gen", "emit a builtin or random instance");
    std::string gen_name;
    unsigned gen_seed = 1;
    std::string gen_out;
    gen->add_option("name", gen_name, "builtin name or 'random'")->required();
    gen->add_option("--seed", gen_seed, "seed for 'random'");
    gen->add_option("--out", gen_out, "write the instance JSON here");

    app.add_subcommand("list", "print builtin instance names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand("simulate"))
            return run_simulate(sim_inst, sim_horizon, sim_max_phases, sim_mode, sim_out,
                                sim_csv);
        if (app.got_subcommand("verify")) return run_verify(ver_inst, ver_trace, ver_claim);
        if (app.got_subcommand("analyze")) return run_analyze(ana_trace, ana_period, ana_from);
        if (app.got_subcommand("gen")) return run_gen(gen_name, gen_seed, gen_out);
        return run_list();
    } catch (const CapExceeded& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 3;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    }
}
