#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "witness/certify.hpp"
#include "witness/model.hpp"
#include "witness/reachform.hpp"
#include "witness/subsys.hpp"

namespace fs = std::filesystem;
using namespace witness;
using certify::PropertyQuery;
using certify::Sense;
using model::Mdp;
using model::Mode;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitUnsatisfied = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

Mode parse_mode(const std::string& text) {
    if (text == "min") return Mode::Min;
    if (text == "max") return Mode::Max;
    throw std::runtime_error("mode must be 'min' or 'max'");
}

Sense parse_sense(const std::string& text) {
    auto sense = certify::sense_from_string(text);
    if (!sense) throw std::runtime_error("sense must be one of le, lt, ge, gt");
    return *sense;
}

struct ModelArgs {
    std::string tra, lab;
    std::string init_label = "init";
    std::string goal_label = "goal";

    void attach(CLI::App* cmd, bool with_reduce_labels = true) {
        cmd->add_option("--tra", tra, "explicit transition file")->required();
        cmd->add_option("--lab", lab, "label file")->required();
        if (with_reduce_labels) {
            cmd->add_option("--init", init_label, "label of the initial state")->required();
            cmd->add_option("--goal", goal_label, "label of the target states")->required();
        }
    }

    Mdp load() const { return model::parse_model(read_file(tra), read_file(lab)); }
};

// One row of runs.csv; the column order is fixed.
struct RunRecord {
    std::string command, digest, mode, sense;
    std::string threshold, method, iteration, states, value;
    double seconds = 0.0;
    std::string status;
};

void append_records(const std::string& dir, const std::vector<RunRecord>& records) {
    if (records.empty()) return;
    fs::create_directories(dir.empty() ? "." : dir);
    fs::path path = fs::path(dir.empty() ? "." : dir) / "runs.csv";
    const bool fresh = !fs::exists(path);
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    if (fresh)
        out << "command,digest,mode,sense,threshold,method,iteration,states,value,seconds,status\n";
    for (const auto& r : records) {
        char seconds[32];
        std::snprintf(seconds, sizeof(seconds), "%.6f", r.seconds);
        out << r.command << ',' << r.digest << ',' << r.mode << ',' << r.sense << ','
            << r.threshold << ',' << r.method << ',' << r.iteration << ',' << r.states << ','
            << r.value << ',' << seconds << ',' << r.status << '\n';
    }
}

void write_subsystem_files(const std::string& dir, const std::string& base,
                           const subsys::SubsystemResult& result, const std::string& digest) {
    fs::create_directories(dir.empty() ? "." : dir);
    fs::path prefix = fs::path(dir.empty() ? "." : dir) / base;
    write_file(prefix.string() + ".tra", model::serialize_tra(result.subsystem));
    write_file(prefix.string() + ".lab", model::serialize_lab(result.subsystem));
    std::ostringstream mask;
    mask << "# interior states of the witnessing subsystem\n";
    for (std::size_t s = 0; s < result.state_mask.size(); ++s)
        if (result.state_mask[s]) mask << s << '\n';
    write_file(prefix.string() + ".mask", mask.str());
    write_file(prefix.string() + ".cert", certify::write_certificate(result.certificate, digest));
    write_file(prefix.string() + ".summary", subsys::summary_line(result) + "\n");
}

struct MinimizeArgs {
    ModelArgs model;
    std::string mode_text, method;
    double threshold = 0.0;
    std::string init_obj = "ao";
    int iterations = 3;
    std::string labels_csv;
    std::string out_dir = ".";
};

subsys::QSConfig::InitialObjective parse_init_obj(const std::string& text) {
    if (text == "ao") return subsys::QSConfig::InitialObjective::AO;
    if (text == "invf") return subsys::QSConfig::InitialObjective::InvF;
    if (text == "invp") return subsys::QSConfig::InitialObjective::InvP;
    throw std::runtime_error("initial objective must be one of ao, invf, invp");
}

std::optional<subsys::LabelMap> label_map_from_csv(const reachform::ReachabilityForm& rf,
                                                   const std::string& csv) {
    if (csv.empty()) return std::nullopt;
    subsys::LabelMap map;
    std::stringstream in(csv);
    std::string name;
    while (std::getline(in, name, ',')) {
        if (name.empty()) continue;
        if (!rf.system.labels.count(name))
            throw std::runtime_error("label '" + name + "' does not occur in the model");
        map.labels.push_back(name);
    }
    if (map.labels.empty()) throw std::runtime_error("no labels given");
    map.assignment.resize(rf.num_interior());
    for (std::size_t l = 0; l < map.labels.size(); ++l)
        for (int s : rf.system.labels.at(map.labels[l]))
            if (s < rf.num_interior()) map.assignment[s].push_back(static_cast<int>(l));
    return map;
}

int cmd_minimize(const MinimizeArgs& args) {
    Mode mode = parse_mode(args.mode_text);
    auto [rf, maps] =
        reachform::reduce(args.model.load(), args.model.init_label, args.model.goal_label);
    const std::string digest = model::digest(rf.system);
    auto labels = label_map_from_csv(rf, args.labels_csv);

    std::vector<RunRecord> records;
    auto record = [&](const std::string& method, int iteration, const std::string& states,
                      const std::string& value, double seconds, const std::string& status) {
        records.push_back(RunRecord{"minimize", digest, model::to_string(mode), "ge",
                                    format_number(args.threshold), method,
                                    iteration >= 0 ? std::to_string(iteration) : "", states, value,
                                    seconds, status});
    };

    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };

    bool satisfied = true;
    if (args.method == "milp") {
        auto result = subsys::milp_exact(rf, mode, args.threshold, labels);
        if (result) {
            std::cout << "subsys states:" << result->states()
                      << ", value: " << format_number(result->objective_value) << "\n";
            write_subsystem_files(args.out_dir, "subsys", *result, digest);
            record("milp", 0, std::to_string(result->states()),
                   format_number(result->objective_value), elapsed(),
                   result->optimal ? "ok" : "incumbent");
        } else {
            satisfied = false;
            record("milp", 0, "", "", elapsed(), "unsatisfied");
        }
    } else if (args.method == "qs") {
        subsys::QSConfig config;
        config.iterations = args.iterations;
        config.initial_objective = parse_init_obj(args.init_obj);
        const std::string method = "qs-" + args.init_obj;
        satisfied = subsys::qs_heuristic_iterate(
            rf, mode, args.threshold, config, labels, [&](subsys::SubsystemResult result) {
                std::cout << "subsys states:" << result.states()
                          << ", value: " << format_number(result.objective_value) << "\n";
                write_subsystem_files(args.out_dir, "subsys_" + std::to_string(result.iteration),
                                      result, digest);
                record(method, result.iteration, std::to_string(result.states()),
                       format_number(result.objective_value), elapsed(), "ok");
                return true;
            });
        if (!satisfied) record(method, -1, "", "", elapsed(), "unsatisfied");
    } else {
        throw std::runtime_error("method must be 'qs' or 'milp'");
    }
    append_records(args.out_dir, records);
    if (!satisfied) {
        std::cerr << "Property is not satisfied!\n";
        return kExitUnsatisfied;
    }
    return kExitOk;
}

struct CertifyArgs {
    ModelArgs model;
    std::string mode_text, sense_text;
    double threshold = 0.0;
    std::string out = "certificate.cert";
};

int cmd_certify(const CertifyArgs& args) {
    PropertyQuery query{parse_mode(args.mode_text), parse_sense(args.sense_text), args.threshold};
    auto [rf, maps] =
        reachform::reduce(args.model.load(), args.model.init_label, args.model.goal_label);
    auto cert = certify::generate_certificate(rf, query);
    if (!cert) {
        std::cerr << "Property is not satisfied!\n";
        return kExitUnsatisfied;
    }
    write_file(args.out, certify::write_certificate(*cert, model::digest(rf.system)));
    std::cout << "certificate written to " << args.out << "\n";
    return kExitOk;
}

struct CheckArgs {
    ModelArgs model;
    std::string mode_text, sense_text;
    double threshold = 0.0;
    std::string cert;
    double tolerance = 1e-6;
};

int cmd_check(const CheckArgs& args) {
    PropertyQuery query{parse_mode(args.mode_text), parse_sense(args.sense_text), args.threshold};
    auto [rf, maps] =
        reachform::reduce(args.model.load(), args.model.init_label, args.model.goal_label);
    auto parsed = certify::read_certificate(read_file(args.cert));
    const std::string digest = model::digest(rf.system);
    if (parsed.model_digest != digest) {
        std::cerr << "certificate digest " << parsed.model_digest
                  << " does not match the model digest " << digest << "\n";
        return kExitUsage;
    }
    auto report = certify::check_certificate(rf, query, parsed.certificate.values, args.tolerance);
    if (report.ok) {
        std::cout << "True\n";
        return kExitOk;
    }
    std::cout << "False\n";
    for (const auto& v : report.violations) {
        const char* kind = v.kind == certify::CheckReport::RowKind::Constraint ? "constraint"
                           : v.kind == certify::CheckReport::RowKind::Threshold ? "threshold"
                                                                                : "nonnegativity";
        std::cout << "violated " << kind << " row " << v.index << " by "
                  << format_number(v.residual) << "\n";
    }
    return kExitUnsatisfied;
}

struct RenderArgs {
    ModelArgs model;
    std::string mask_file, cert_file, out;
};

int cmd_render(const RenderArgs& args) {
    Mdp mdp = args.model.load();
    std::optional<std::set<int>> mask;
    if (!args.mask_file.empty()) {
        mask.emplace();
        std::istringstream in(read_file(args.mask_file));
        std::string line;
        while (std::getline(in, line)) {
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            std::istringstream tokens(line);
            long s;
            while (tokens >> s) mask->insert(static_cast<int>(s));
        }
        // Sinks are always part of a subsystem rendering.
        if (mdp.num_states >= 2) {
            mask->insert(mdp.num_states - 2);
            mask->insert(mdp.num_states - 1);
        }
    }
    std::optional<std::vector<double>> values;
    if (!args.cert_file.empty())
        values = certify::read_certificate(read_file(args.cert_file)).certificate.values;
    write_file(args.out, model::export_dot(mdp, mask, values));
    return kExitOk;
}

struct BenchArgs {
    ModelArgs model;
    std::string mode_text = "min";
    std::string thresholds;
    std::string methods = "qs-ao,milp";
    int iterations = 5;
    std::string out_dir = ".";
};

int cmd_bench(const BenchArgs& args) {
    Mode mode = parse_mode(args.mode_text);
    double lo, hi, step;
    if (std::sscanf(args.thresholds.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || step <= 0.0 ||
        lo > hi)
        throw std::runtime_error("--thresholds expects '<from>:<to>:<step>' with a positive step");
    std::vector<double> thresholds;
    for (double t = lo; t <= hi + 1e-12; t += step) thresholds.push_back(t);
    if (thresholds.empty()) throw std::runtime_error("empty threshold range");

    std::vector<std::string> methods;
    std::stringstream in(args.methods);
    std::string name;
    while (std::getline(in, name, ','))
        if (!name.empty()) methods.push_back(name);
    if (methods.empty()) throw std::runtime_error("no methods given");

    auto [rf, maps] =
        reachform::reduce(args.model.load(), args.model.init_label, args.model.goal_label);
    const std::string digest = model::digest(rf.system);

    std::vector<RunRecord> records;
    double max_seconds = 0.0;
    std::size_t failures = 0;
    for (double threshold : thresholds) {
        for (const auto& method : methods) {
            auto cell_start = std::chrono::steady_clock::now();
            auto cell_elapsed = [&] {
                return std::chrono::duration<double>(std::chrono::steady_clock::now() - cell_start)
                    .count();
            };
            auto record = [&](int iteration, const std::string& states, const std::string& value,
                              const std::string& status) {
                records.push_back(RunRecord{"bench", digest, model::to_string(mode), "ge",
                                            format_number(threshold), method,
                                            iteration >= 0 ? std::to_string(iteration) : "",
                                            states, value, cell_elapsed(), status});
            };
            try {
                if (method == "milp") {
                    auto result = subsys::milp_exact(rf, mode, threshold);
                    if (result)
                        record(0, std::to_string(result->states()),
                               format_number(result->objective_value),
                               result->optimal ? "ok" : "incumbent");
                    else
                        record(0, "", "", "unsatisfied");
                } else if (method.rfind("qs-", 0) == 0) {
                    subsys::QSConfig config;
                    config.iterations = args.iterations;
                    config.initial_objective = parse_init_obj(method.substr(3));
                    bool satisfied = subsys::qs_heuristic_iterate(
                        rf, mode, threshold, config, std::nullopt,
                        [&](subsys::SubsystemResult result) {
                            record(result.iteration, std::to_string(result.states()),
                                   format_number(result.objective_value), "ok");
                            return true;
                        });
                    if (!satisfied) record(-1, "", "", "unsatisfied");
                } else {
                    throw std::runtime_error("unknown method '" + method + "'");
                }
            } catch (const std::exception& e) {
                record(-1, "", "", "error");
                std::cerr << "bench cell (" << format_number(threshold) << ", " << method
                          << ") failed: " << e.what() << "\n";
                ++failures;
            }
            max_seconds = std::max(max_seconds, cell_elapsed());
        }
    }
    records.push_back(RunRecord{"bench", digest, model::to_string(mode), "ge", "", "max-time", "",
                                "", "", max_seconds, "ok"});
    append_records(args.out_dir, records);
    const std::size_t cells = thresholds.size() * methods.size();
    return failures == cells ? kExitUsage : kExitOk;
}

struct GenArgs {
    std::string kind = "layered";
    int states = 1000;
    int width = 50;
    int actions = 3;
    std::uint64_t seed = 0;
    std::string out_tra, out_lab;
};

int cmd_gen(const GenArgs& args, bool seed_given) {
    std::uint64_t seed = args.seed;
    if (!seed_given) {
        if (const char* env = std::getenv("WITNESS_SEED")) seed = std::strtoull(env, nullptr, 10);
    }
    std::mt19937_64 rng(seed);
    Mdp mdp;
    if (args.kind == "layered") {
        const int width = std::max(1, args.width);
        const int layers = std::max(2, (args.states - 3) / width + 1);
        mdp.num_states = 1 + (layers - 1) * width + 2;
        mdp.dtmc = true;
        mdp.initial = 0;
        mdp.choices.resize(mdp.num_states);
        const int goal = mdp.num_states - 2, fail = mdp.num_states - 1;
        std::uniform_real_distribution<double> split(0.2, 0.8);
        std::uniform_int_distribution<int> pick(0, width - 1);
        auto at = [&](int layer, int j) { return layer == 0 ? 0 : 1 + (layer - 1) * width + j; };
        for (int layer = 0; layer < layers; ++layer) {
            const int count = layer == 0 ? 1 : width;
            for (int j = 0; j < count; ++j) {
                const int s = at(layer, j);
                double p = split(rng);
                if (layer + 1 < layers) {
                    int a = pick(rng), b = pick(rng);
                    if (a == b) b = (b + 1) % width;
                    mdp.choices[s].push_back(
                        model::ActionRow{0, {{at(layer + 1, a), p}, {at(layer + 1, b), 1.0 - p}}});
                } else {
                    mdp.choices[s].push_back(model::ActionRow{0, {{goal, p}, {fail, 1.0 - p}}});
                }
            }
        }
        mdp.choices[goal].push_back(model::ActionRow{0, {{goal, 1.0}}});
        mdp.choices[fail].push_back(model::ActionRow{0, {{fail, 1.0}}});
    } else if (args.kind == "random-mdp" || args.kind == "random-dtmc") {
        const bool dtmc = args.kind == "random-dtmc";
        const int interior = std::max(1, args.states - 2);
        mdp.num_states = interior + 2;
        mdp.dtmc = dtmc;
        mdp.initial = 0;
        mdp.choices.resize(mdp.num_states);
        const int goal = interior, fail = interior + 1;
        std::uniform_int_distribution<int> action_count(1, dtmc ? 1 : std::max(1, args.actions));
        std::uniform_int_distribution<int> target_count(1, 3);
        std::uniform_int_distribution<int> any_state(0, mdp.num_states - 1);
        std::uniform_real_distribution<double> weight(0.1, 1.0);
        for (int s = 0; s < interior; ++s) {
            const int na = action_count(rng);
            for (int a = 0; a < na; ++a) {
                const int nt = target_count(rng);
                std::set<int> targets;
                while (static_cast<int>(targets.size()) < nt) targets.insert(any_state(rng));
                std::vector<double> w;
                double sum = 0.0;
                for (std::size_t i = 0; i < targets.size(); ++i) {
                    w.push_back(weight(rng));
                    sum += w.back();
                }
                model::ActionRow row{a, {}};
                double acc = 0.0;
                std::size_t i = 0;
                for (int t : targets) {
                    double p = i + 1 == targets.size() ? 1.0 - acc : w[i] / sum;
                    acc += p;
                    row.targets.emplace_back(t, p);
                    ++i;
                }
                mdp.choices[s].push_back(std::move(row));
            }
        }
        mdp.choices[goal].push_back(model::ActionRow{0, {{goal, 1.0}}});
        mdp.choices[fail].push_back(model::ActionRow{0, {{fail, 1.0}}});
    } else {
        throw std::runtime_error("kind must be layered, random-mdp or random-dtmc");
    }
    mdp.labels["init"] = {0};
    mdp.labels["goal"] = {mdp.num_states - 2};
    model::validate(mdp);
    write_file(args.out_tra, model::serialize_tra(mdp));
    write_file(args.out_lab, model::serialize_lab(mdp));
    std::cout << "generated " << mdp.num_states << " states, " << mdp.num_choice_rows()
              << " choices\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"witness - small witnessing subsystems and Farkas certificates for "
                 "reachability thresholds in DTMCs and MDPs"};
    app.require_subcommand(1);

    MinimizeArgs minimize;
    auto* cmd_min = app.add_subcommand("minimize", "compute a small witnessing subsystem");
    minimize.model.attach(cmd_min);
    cmd_min->add_option("--mode", minimize.mode_text, "min or max")->required();
    cmd_min->add_option("--threshold", minimize.threshold, "lower probability bound")->required();
    cmd_min->add_option("--method", minimize.method, "qs or milp")->required();
    cmd_min->add_option("--init-obj", minimize.init_obj, "ao, invf or invp");
    cmd_min->add_option("--iterations", minimize.iterations, "quotient-sum iterations");
    cmd_min->add_option("--labels", minimize.labels_csv, "comma-separated labels to minimize");
    cmd_min->add_option("--out", minimize.out_dir, "output directory");

    CertifyArgs certify_args;
    auto* cmd_cert = app.add_subcommand("certify", "generate a Farkas certificate");
    certify_args.model.attach(cmd_cert);
    cmd_cert->add_option("--mode", certify_args.mode_text, "min or max")->required();
    cmd_cert->add_option("--sense", certify_args.sense_text, "le, lt, ge or gt")->required();
    cmd_cert->add_option("--threshold", certify_args.threshold, "threshold")->required();
    cmd_cert->add_option("--out", certify_args.out, "certificate file");

    CheckArgs check_args;
    auto* cmd_chk = app.add_subcommand("check", "verify a Farkas certificate");
    check_args.model.attach(cmd_chk);
    cmd_chk->add_option("--mode", check_args.mode_text, "min or max")->required();
    cmd_chk->add_option("--sense", check_args.sense_text, "le, lt, ge or gt")->required();
    cmd_chk->add_option("--threshold", check_args.threshold, "threshold")->required();
    cmd_chk->add_option("--cert", check_args.cert, "certificate file")->required();
    cmd_chk->add_option("--tolerance", check_args.tolerance, "verification tolerance");

    RenderArgs render_args;
    auto* cmd_rnd = app.add_subcommand("render", "export a GraphViz digraph");
    render_args.model.attach(cmd_rnd, false);
    cmd_rnd->add_option("--mask", render_args.mask_file, "subsystem mask file");
    cmd_rnd->add_option("--cert", render_args.cert_file, "certificate file");
    cmd_rnd->add_option("--out", render_args.out, "output DOT file")->required();

    BenchArgs bench_args;
    auto* cmd_bnc = app.add_subcommand("bench", "threshold sweeps with CSV output");
    bench_args.model.attach(cmd_bnc);
    cmd_bnc->add_option("--mode", bench_args.mode_text, "min or max");
    cmd_bnc->add_option("--thresholds", bench_args.thresholds, "<from>:<to>:<step>")->required();
    cmd_bnc->add_option("--methods", bench_args.methods, "comma-separated methods");
    cmd_bnc->add_option("--iterations", bench_args.iterations, "quotient-sum iterations");
    cmd_bnc->add_option("--out", bench_args.out_dir, "output directory");

    GenArgs gen_args;
    auto* cmd_g = app.add_subcommand("gen", "generate a test model");
    cmd_g->add_option("--kind", gen_args.kind, "layered, random-mdp or random-dtmc");
    cmd_g->add_option("--states", gen_args.states, "approximate state count");
    cmd_g->add_option("--width", gen_args.width, "layer width (layered)");
    cmd_g->add_option("--actions", gen_args.actions, "max actions per state (random-mdp)");
    auto* seed_opt = cmd_g->add_option("--seed", gen_args.seed, "seed (default WITNESS_SEED)");
    cmd_g->add_option("--out-tra", gen_args.out_tra, "output .tra file")->required();
    cmd_g->add_option("--out-lab", gen_args.out_lab, "output .lab file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (cmd_min->parsed()) return cmd_minimize(minimize);
        if (cmd_cert->parsed()) return cmd_certify(certify_args);
        if (cmd_chk->parsed()) return cmd_check(check_args);
        if (cmd_rnd->parsed()) return cmd_render(render_args);
        if (cmd_bnc->parsed()) return cmd_bench(bench_args);
        if (cmd_g->parsed()) return cmd_gen(gen_args, seed_opt->count() > 0);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
