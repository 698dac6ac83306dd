#include "advos/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "advos/config.hpp"
#include "advos/data.hpp"
#include "advos/error.hpp"
#include "advos/log.hpp"
#include "advos/resample.hpp"

namespace advos::harness {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

const char* kVersion = "advos 0.1.0";

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

const std::vector<std::string> kMethodOrder = {"baseline", "ro",     "smote", "b-smote",
                                               "adasyn",   "ao",     "do"};

const std::set<std::string> kKnownKeys = {
    "datasets", "methods",      "seeds",     "out",      "k",        "jobs",
    "epochs",   "batch",        "latent",    "f",        "operator", "gp_lambda",
    "critic_steps", "g_trunk",  "d_hidden",  "q_hidden", "lr_gd",    "lr_q",
    "beta1_gd", "beta2_gd",     "beta1_q",   "beta2_q",  "verbose"};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(s);
    while (std::getline(ss, cur, ',')) {
        const auto a = cur.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        const auto b = cur.find_last_not_of(" \t");
        out.push_back(cur.substr(a, b - a + 1));
    }
    return out;
}

}  // namespace

std::string canonical_method(const std::string& name) {
    std::string s = lower(name);
    const auto plus = s.find("+q");
    if (plus != std::string::npos && plus == s.size() - 2) s = s.substr(0, plus);
    if (s == "q" || s == "baseline") return "baseline";
    if (s == "ro" || s == "random") return "ro";
    if (s == "smote") return "smote";
    if (s == "b-smote" || s == "bsmote" || s == "borderline-smote") return "b-smote";
    if (s == "adasyn" || s == "adsyn") return "adasyn";
    if (s == "ao") return "ao";
    if (s == "do") return "do";
    throw ConfigError("unknown method: " + name);
}

void ExperimentConfig::validate() const {
    if (manifests.empty()) throw ConfigError("experiment config lists no datasets");
    if (seeds.empty()) throw ConfigError("experiment config lists no seeds");
    if (methods.empty()) throw ConfigError("experiment config lists no methods");
    if (resample_k < 1) throw ConfigError("k must be >= 1");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    train.validate();
}

ExperimentConfig load_experiment(const std::string& path) {
    const auto kv = config::parse_kv_file(path);
    for (const auto& [key, value] : kv) {
        (void)value;
        if (!kKnownKeys.count(key)) throw ConfigError(path + ": unknown key '" + key + "'");
    }
    ExperimentConfig cfg;
    cfg.fingerprint = config::fingerprint(kv);

    const std::string dir = fs::path(path).parent_path().string();
    for (const auto& m : split_list(config::get_str(kv, "datasets", ""))) {
        fs::path p(m);
        cfg.manifests.push_back(p.is_absolute() || dir.empty() ? m : (fs::path(dir) / p).string());
    }
    const std::string methods = config::get_str(kv, "methods", "baseline");
    cfg.methods.clear();
    for (const auto& m : split_list(methods)) cfg.methods.push_back(canonical_method(m));

    cfg.seeds.clear();
    for (int s : config::get_int_list(kv, "seeds", {1, 2, 3})) cfg.seeds.push_back(s);
    cfg.out_dir = config::get_str(kv, "out", "");
    cfg.resample_k = config::get_int(kv, "k", 5);
    cfg.jobs = config::get_int(kv, "jobs", 1);

    adv::TrainConfig& t = cfg.train;
    t.epochs = config::get_int(kv, "epochs", t.epochs);
    t.batch = config::get_int(kv, "batch", t.batch);
    t.latent = config::get_int(kv, "latent", t.latent);
    t.critic_steps = config::get_int(kv, "critic_steps", t.critic_steps);
    t.f = config::get_double(kv, "f", t.f);
    t.gp_lambda = config::get_double(kv, "gp_lambda", t.gp_lambda);
    const std::string op = lower(config::get_str(kv, "operator", "wgan-gp"));
    if (op == "wgan-gp" || op == "wgangp") {
        t.op = adv::Operator::kWganGp;
    } else if (op == "vanilla") {
        t.op = adv::Operator::kVanilla;
    } else {
        throw ConfigError(path + ": operator must be wgan-gp or vanilla");
    }
    t.g_trunk = config::get_int_list(kv, "g_trunk", t.g_trunk);
    t.d_hidden = config::get_int_list(kv, "d_hidden", t.d_hidden);
    t.q_hidden = config::get_int_list(kv, "q_hidden", t.q_hidden);
    t.adam_gd.lr = config::get_double(kv, "lr_gd", t.adam_gd.lr);
    t.adam_q.lr = config::get_double(kv, "lr_q", t.adam_q.lr);
    t.adam_gd.beta1 = config::get_double(kv, "beta1_gd", t.adam_gd.beta1);
    t.adam_gd.beta2 = config::get_double(kv, "beta2_gd", t.adam_gd.beta2);
    t.adam_q.beta1 = config::get_double(kv, "beta1_q", t.adam_q.beta1);
    t.adam_q.beta2 = config::get_double(kv, "beta2_q", t.adam_q.beta2);
    t.verbose = config::get_bool(kv, "verbose", false);

    cfg.validate();
    return cfg;
}

std::string version_string() { return kVersion; }

std::string resolve_out_dir(const std::string& flag, const ExperimentConfig& cfg) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("ADVOS_OUT"); env && *env) return env;
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    return "results";
}

double median(std::vector<double> v) {
    if (v.empty()) throw ContractError("median of empty list");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

CellResult run_cell(const std::string& manifest_path, const std::string& method, int seed,
                    const ExperimentConfig& cfg, double f_override) {
    CellResult cell;
    cell.method = canonical_method(method);
    cell.seed = seed;
    cell.f = f_override >= 0.0 ? f_override : cfg.train.f;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const data::Manifest manifest = data::load_manifest(manifest_path);
        cell.dataset = manifest.name;
        auto pair = data::load_pipeline(manifest_path, static_cast<std::uint64_t>(seed));

        adv::TrainConfig tc = cfg.train;
        tc.seed = static_cast<std::uint64_t>(seed);
        tc.f = cell.f;
        if (cell.method == "ao") {
            tc.regime = adv::Regime::kAO;
        } else if (cell.method == "do") {
            tc.regime = adv::Regime::kDO;
        } else {
            tc.regime = adv::Regime::kBaseline;
        }
        if (cell.method == "ro" || cell.method == "smote" || cell.method == "b-smote" ||
            cell.method == "adasyn") {
            resample::ResampleSpec rs;
            rs.method = resample::method_from_string(cell.method);
            rs.k = cfg.resample_k;
            rs.seed = static_cast<std::uint64_t>(seed);
            pair.train = resample::apply(pair.train, rs);
        }

        adv::TrainResult r = adv::train(pair.train, pair.test, tc);
        cell.ok = true;
        cell.epochs = tc.epochs;
        cell.acsa_final = r.final_report.acsa;
        cell.gm_final = r.final_report.gm;
        cell.acsa_best = r.best_by_acsa.acsa;
        cell.best_epoch = r.best_by_acsa.epoch;
        cell.gm_best = r.best_gm;
        cell.best_gm_epoch = r.best_gm_epoch;
        cell.final_report = std::move(r.final_report);
        cell.best_report = std::move(r.best_by_acsa);
    } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
        if (cell.dataset.empty()) cell.dataset = manifest_path;
    }
    cell.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return cell;
}

namespace {

struct Job {
    std::string manifest;
    std::string method;
    int seed = 0;
    double f = -1.0;
};

ResultTable run_jobs(const ExperimentConfig& cfg, const std::vector<Job>& jobs) {
    ResultTable table;
    table.version = version_string();
    table.fingerprint = cfg.fingerprint;
    table.cells.resize(jobs.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            const Job& j = jobs[i];
            log::info("cell start: ", j.manifest, " method=", j.method, " seed=", j.seed,
                      j.f >= 0 ? " f=" + std::to_string(j.f) : "");
            table.cells[i] = run_cell(j.manifest, j.method, j.seed, cfg, j.f);
            const CellResult& c = table.cells[i];
            if (c.ok) {
                log::info("cell done: ", c.dataset, "/", c.method, " seed=", c.seed,
                          " acsa_best=", c.acsa_best, " gm_best=", c.gm_best, " (",
                          c.wall_seconds, "s)");
            } else {
                log::warn("cell NA: ", c.dataset, "/", c.method, " seed=", c.seed, ": ", c.error);
            }
        }
    };

    const int n = std::min<int>(cfg.jobs, static_cast<int>(jobs.size()));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return table;
}

}  // namespace

ResultTable run(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<Job> jobs;
    for (const auto& m : cfg.manifests) {
        for (const auto& method : cfg.methods) {
            for (int s : cfg.seeds) jobs.push_back({m, method, s, -1.0});
        }
    }
    return run_jobs(cfg, jobs);
}

ResultTable sweep_fs(const ExperimentConfig& cfg, const std::vector<double>& grid) {
    cfg.validate();
    if (grid.empty()) throw ConfigError("sweep: empty grid");
    for (const auto& method : cfg.methods) {
        const std::string m = canonical_method(method);
        if (m != "ao" && m != "do") {
            throw ConfigError("sweep: method must be ao or do, got " + method);
        }
    }
    std::vector<Job> jobs;
    for (const auto& m : cfg.manifests) {
        for (const auto& method : cfg.methods) {
            for (double f : grid) {
                for (int s : cfg.seeds) jobs.push_back({m, method, s, f});
            }
        }
    }
    return run_jobs(cfg, jobs);
}

std::vector<MedianRow> ResultTable::medians() const {
    // Group by (dataset, method, f), preserving first-seen dataset order and
    // canonical method order.
    std::vector<MedianRow> rows;
    std::vector<std::string> datasets;
    for (const auto& c : cells) {
        if (std::find(datasets.begin(), datasets.end(), c.dataset) == datasets.end()) {
            datasets.push_back(c.dataset);
        }
    }
    std::set<double> fs;
    for (const auto& c : cells) fs.insert(c.f);
    for (const auto& ds : datasets) {
        for (const auto& method : kMethodOrder) {
            for (double f : fs) {
                std::vector<const CellResult*> group;
                for (const auto& c : cells) {
                    if (c.dataset == ds && c.method == method && c.f == f) group.push_back(&c);
                }
                if (group.empty()) continue;
                MedianRow row;
                row.dataset = ds;
                row.method = method;
                row.f = f;
                std::vector<double> ab, gb, af, gf;
                for (const auto* c : group) {
                    if (!c->ok) continue;
                    ab.push_back(c->acsa_best);
                    gb.push_back(c->gm_best);
                    af.push_back(c->acsa_final);
                    gf.push_back(c->gm_final);
                }
                row.seeds_ok = static_cast<int>(ab.size());
                row.na = ab.empty();
                if (!row.na) {
                    row.acsa_best = median(ab);
                    row.gm_best = median(gb);
                    row.acsa_final = median(af);
                    row.gm_final = median(gf);
                }
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

const CellResult* ResultTable::find(const std::string& dataset, const std::string& method,
                                    int seed, double f) const {
    for (const auto& c : cells) {
        if (c.dataset == dataset && c.method == method && c.seed == seed && c.f == f) return &c;
    }
    return nullptr;
}

namespace {

ordered_json report_json(const metrics::EvalReport& r) { return metrics::to_json(r); }

metrics::EvalReport report_from_json(const nlohmann::json& j) {
    metrics::EvalReport r;
    r.acsa = j.at("acsa").get<double>();
    r.gm = j.at("gm").get<double>();
    r.recalls = j.at("recalls").get<std::vector<double>>();
    r.epoch = j.at("epoch").get<int>();
    const auto& m = j.at("confusion");
    r.conf = metrics::Confusion(static_cast<int>(m.size()));
    for (int t = 0; t < r.conf.classes; ++t) {
        for (int p = 0; p < r.conf.classes; ++p) {
            r.conf.at(t, p) = m.at(t).at(p).get<std::int64_t>();
        }
    }
    return r;
}

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
}

}  // namespace

std::string format_table(const ResultTable& t) {
    const auto rows = t.medians();
    std::set<double> fs;
    for (const auto& r : rows) fs.insert(r.f);
    std::vector<std::string> methods;
    for (const auto& m : kMethodOrder) {
        for (const auto& r : rows) {
            if (r.method == m) {
                methods.push_back(m);
                break;
            }
        }
    }
    std::ostringstream out;
    for (double f : fs) {
        if (fs.size() > 1) out << "# f = " << f << "\n";
        out << "dataset";
        for (const auto& m : methods) out << '\t' << m << " ACSA" << '\t' << m << " GM";
        out << '\n';
        std::vector<std::string> datasets;
        for (const auto& r : rows) {
            if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) {
                datasets.push_back(r.dataset);
            }
        }
        for (const auto& ds : datasets) {
            out << ds;
            for (const auto& m : methods) {
                const MedianRow* found = nullptr;
                for (const auto& r : rows) {
                    if (r.dataset == ds && r.method == m && r.f == f) {
                        found = &r;
                        break;
                    }
                }
                if (!found || found->na) {
                    out << "\tNA\tNA";
                } else {
                    out << '\t' << fmt2(found->acsa_best) << '\t' << fmt2(found->gm_best);
                }
            }
            out << '\n';
        }
    }
    return out.str();
}

void emit_table(const ResultTable& t, const std::string& dir) {
    if (t.cells.empty()) throw ContractError("emit_table: no cells");
    fs::create_directories(dir);

    ordered_json j;
    j["version"] = t.version;
    j["config_hash"] = t.fingerprint;
    j["cells"] = ordered_json::array();
    for (const auto& c : t.cells) {
        ordered_json cj;
        cj["dataset"] = c.dataset;
        cj["method"] = c.method;
        cj["seed"] = c.seed;
        cj["f"] = c.f;
        cj["ok"] = c.ok;
        if (!c.ok) {
            cj["error"] = c.error;
        } else {
            cj["epochs"] = c.epochs;
            cj["acsa_final"] = c.acsa_final;
            cj["gm_final"] = c.gm_final;
            cj["acsa_best"] = c.acsa_best;
            cj["best_epoch"] = c.best_epoch;
            cj["gm_best"] = c.gm_best;
            cj["best_gm_epoch"] = c.best_gm_epoch;
            cj["final_report"] = report_json(c.final_report);
            cj["best_report"] = report_json(c.best_report);
        }
        j["cells"].push_back(std::move(cj));
    }
    j["medians"] = ordered_json::array();
    for (const auto& r : t.medians()) {
        ordered_json rj;
        rj["dataset"] = r.dataset;
        rj["method"] = r.method;
        rj["f"] = r.f;
        rj["seeds_ok"] = r.seeds_ok;
        rj["na"] = r.na;
        if (!r.na) {
            rj["acsa_best"] = r.acsa_best;
            rj["gm_best"] = r.gm_best;
            rj["acsa_final"] = r.acsa_final;
            rj["gm_final"] = r.gm_final;
        }
        j["medians"].push_back(std::move(rj));
    }
    {
        std::ofstream out(dir + "/results.json", std::ios::binary);
        if (!out) throw IngestError("emit_table: cannot write " + dir + "/results.json");
        out << j.dump(2) << '\n';
    }
    {
        ordered_json tj;
        tj["cells"] = ordered_json::array();
        for (const auto& c : t.cells) {
            tj["cells"].push_back({{"dataset", c.dataset},
                                   {"method", c.method},
                                   {"seed", c.seed},
                                   {"f", c.f},
                                   {"wall_seconds", c.wall_seconds}});
        }
        std::ofstream out(dir + "/timing.json", std::ios::binary);
        out << tj.dump(2) << '\n';
    }
    {
        std::ofstream out(dir + "/table.tsv", std::ios::binary);
        out << format_table(t);
    }
    std::set<double> fs;
    for (const auto& c : t.cells) fs.insert(c.f);
    if (fs.size() > 1) {
        std::ofstream out(dir + "/sweep.tsv", std::ios::binary);
        out << "dataset\tmethod\tf\tacsa_median\n";
        for (const auto& r : t.medians()) {
            out << r.dataset << '\t' << r.method << '\t' << r.f << '\t'
                << (r.na ? "NA" : fmt2(r.acsa_best)) << '\n';
        }
    }
}

ResultTable parse_results(const std::string& json_path) {
    std::ifstream in(json_path, std::ios::binary);
    if (!in) throw IngestError("parse_results: cannot open " + json_path);
    nlohmann::json j = nlohmann::json::parse(in);
    ResultTable t;
    t.version = j.at("version").get<std::string>();
    t.fingerprint = j.at("config_hash").get<std::string>();
    for (const auto& cj : j.at("cells")) {
        CellResult c;
        c.dataset = cj.at("dataset").get<std::string>();
        c.method = cj.at("method").get<std::string>();
        c.seed = cj.at("seed").get<int>();
        c.f = cj.at("f").get<double>();
        c.ok = cj.at("ok").get<bool>();
        if (!c.ok) {
            c.error = cj.at("error").get<std::string>();
        } else {
            c.epochs = cj.at("epochs").get<int>();
            c.acsa_final = cj.at("acsa_final").get<double>();
            c.gm_final = cj.at("gm_final").get<double>();
            c.acsa_best = cj.at("acsa_best").get<double>();
            c.best_epoch = cj.at("best_epoch").get<int>();
            c.gm_best = cj.at("gm_best").get<double>();
            c.best_gm_epoch = cj.at("best_gm_epoch").get<int>();
            c.final_report = report_from_json(cj.at("final_report"));
            c.best_report = report_from_json(cj.at("best_report"));
        }
        t.cells.push_back(std::move(c));
    }
    return t;
}

}  // namespace advos::harness
