#include "qrlbench/bench.hpp"
#include "qrlbench/errors.hpp"
#include "qrlbench/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace qrlbench::bench {

namespace {

std::string join(const std::string &path, const std::string &key)
{
    return path.empty() ? key : path + "." + key;
}

std::string indexed(const std::string &path, std::size_t i)
{
    return path + "[" + std::to_string(i) + "]";
}

/// Field-by-field reader for one JSON object that remembers which keys were
/// consumed, so that leftovers can be reported as unknown.
class ObjectReader {
public:
    ObjectReader(const json &j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) {
            throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
        }
    }

    bool has(const std::string &key) const { return j_.contains(key); }
    std::string path(const std::string &key) const { return join(path_, key); }

    const json *raw(const std::string &key)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void number(const std::string &key, double &out)
    {
        if (const json *v = raw(key)) {
            if (!v->is_number()) {
                throw ConfigError(path(key), "expected a number");
            }
            out = v->get<double>();
        }
    }

    template <typename Int>
    void integer(const std::string &key, Int &out)
    {
        if (const json *v = raw(key)) {
            if (!v->is_number_integer()) {
                throw ConfigError(path(key), "expected an integer");
            }
            if constexpr (std::is_unsigned_v<Int>) {
                if (v->is_number_unsigned()) {
                    out = static_cast<Int>(v->get<std::uint64_t>());
                    return;
                }
                if (v->get<std::int64_t>() < 0) {
                    throw ConfigError(path(key), "expected a non-negative integer");
                }
            }
            out = static_cast<Int>(v->get<std::int64_t>());
        }
    }

    void boolean(const std::string &key, bool &out)
    {
        if (const json *v = raw(key)) {
            if (!v->is_boolean()) {
                throw ConfigError(path(key), "expected true or false");
            }
            out = v->get<bool>();
        }
    }

    void string(const std::string &key, std::string &out)
    {
        if (const json *v = raw(key)) {
            if (!v->is_string()) {
                throw ConfigError(path(key), "expected a string");
            }
            out = v->get<std::string>();
        }
    }

    void numbers(const std::string &key, std::vector<double> &out)
    {
        if (const json *v = raw(key)) {
            if (!v->is_array()) {
                throw ConfigError(path(key), "expected an array of numbers");
            }
            out.clear();
            for (std::size_t i = 0; i < v->size(); ++i) {
                if (!(*v)[i].is_number()) {
                    throw ConfigError(indexed(path(key), i), "expected a number");
                }
                out.push_back((*v)[i].get<double>());
            }
        }
    }

    void finish() const
    {
        for (const auto &item : j_.items()) {
            if (!seen_.count(item.key())) {
                throw ConfigError(path(item.key()), "unknown field");
            }
        }
    }

private:
    const json &j_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string &path, const std::string &message)
{
    if (!ok) {
        throw ConfigError(path, message);
    }
}

beam::Point point_from_json(const json &j, const std::string &path)
{
    require(j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number(), path,
            "expected [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

template <typename Fn>
auto rethrow_as_config(const std::string &path, Fn &&fn)
{
    try {
        return fn();
    } catch (const ConfigError &) {
        throw;
    } catch (const std::invalid_argument &e) {
        throw ConfigError(path, e.what());
    }
}

EnvironmentConfig environment_from_json(const json &j, const std::string &path)
{
    EnvironmentConfig e;
    ObjectReader r(j, path);
    if (const json *list = r.raw("antennas")) {
        require(list->is_array() && !list->empty(), r.path("antennas"),
                "expected a non-empty array of antennas");
        for (std::size_t i = 0; i < list->size(); ++i) {
            const std::string p = indexed(r.path("antennas"), i);
            ObjectReader a((*list)[i], p);
            beam::Antenna antenna;
            if (const json *pos = a.raw("position")) {
                antenna.position = point_from_json(*pos, a.path("position"));
            } else {
                throw ConfigError(a.path("position"), "missing required field");
            }
            if (const json *o = a.raw("orientation")) {
                antenna.orientation = point_from_json(*o, a.path("orientation"));
            }
            a.integer("n_senders", antenna.n_senders);
            a.finish();
            e.antennas.push_back(antenna);
        }
    }
    r.integer("antenna_seed", e.antenna_seed);
    r.integer("n_antennas", e.n_antennas);
    r.number("domain_size", e.domain_size);
    r.number("min_distance", e.min_distance);
    r.number("cutoff_radius", e.cutoff_radius);
    r.integer("n_senders", e.n_senders);
    if (const json *cb = r.raw("codebook")) {
        ObjectReader c(*cb, r.path("codebook"));
        c.integer("n_elements", e.codebook_size);
        c.finish();
    }
    r.integer("trajectory_degree", e.settings.trajectory_degree);
    r.integer("horizon", e.settings.horizon);
    r.integer("observation_stack", e.settings.observation_stack);
    r.finish();

    require(e.domain_size > 0.0, r.path("domain_size"), "must be positive");
    require(e.min_distance >= 0.0, r.path("min_distance"), "must be non-negative");
    require(e.cutoff_radius > 0.0, r.path("cutoff_radius"), "must be positive");
    require(e.n_antennas >= 1, r.path("n_antennas"), "must be at least 1");
    require(e.n_senders >= 1 && e.n_senders % 2 == 1, r.path("n_senders"), "must be odd and positive");
    require(e.codebook_size >= 1, r.path("codebook.n_elements"), "must be at least 1");
    require(e.settings.trajectory_degree >= 2, r.path("trajectory_degree"), "must be at least 2");
    require(e.settings.horizon >= 1, r.path("horizon"), "must be positive");
    require(e.settings.observation_stack >= 1, r.path("observation_stack"), "must be positive");
    if (!e.antennas.empty()) {
        rethrow_as_config(r.path("antennas"), [&] {
            e.build();
            return 0;
        });
    }
    return e;
}

json environment_to_json(const EnvironmentConfig &e)
{
    json j = {
        {"domain_size", e.domain_size},
        {"min_distance", e.min_distance},
        {"cutoff_radius", e.cutoff_radius},
        {"n_senders", e.n_senders},
        {"codebook", {{"n_elements", e.codebook_size}}},
        {"trajectory_degree", e.settings.trajectory_degree},
        {"horizon", e.settings.horizon},
        {"observation_stack", e.settings.observation_stack},
    };
    if (e.antennas.empty()) {
        j["antenna_seed"] = e.antenna_seed;
        j["n_antennas"] = e.n_antennas;
    } else {
        json list = json::array();
        for (const auto &a : e.antennas) {
            list.push_back({{"position", {a.position.x(), a.position.y()}},
                            {"orientation", {a.orientation.x(), a.orientation.y()}},
                            {"n_senders", a.n_senders}});
        }
        j["antennas"] = list;
    }
    return j;
}

bool is_hybrid(const models::ModelSpec &spec)
{
    return std::holds_alternative<models::HybridSpec>(spec);
}

std::string hex64(std::uint64_t v)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::uint64_t fnv1a(const std::string &text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_number(std::ostream &os, double v)
{
    os << std::setprecision(12) << v;
}

bool run_is_complete(const fs::path &dir, std::uint64_t seed, int epochs)
{
    const fs::path log = run_log_path(dir, seed);
    if (!fs::exists(log) || !fs::exists(checkpoint_path(dir, seed))) {
        return false;
    }
    try {
        const rl::RunLog run = read_run_log(log);
        return static_cast<int>(run.epochs.size()) == epochs && run.epochs.back().epoch == epochs;
    } catch (const std::exception &) {
        return false;
    }
}

} // namespace

std::shared_ptr<const beam::AntennaConfig> EnvironmentConfig::build() const
{
    beam::AntennaConfig config;
    if (antennas.empty()) {
        config = beam::sample_configuration(n_antennas, domain_size, min_distance, antenna_seed,
                                            n_senders, codebook_size, cutoff_radius);
    } else {
        config.antennas = antennas;
        config.domain_size = domain_size;
        config.min_distance = min_distance;
        config.cutoff_radius = cutoff_radius;
        config.codebook.n_elements = codebook_size;
        config.validate();
    }
    return std::make_shared<const beam::AntennaConfig>(std::move(config));
}

json to_json(const beam::AntennaConfig &config)
{
    json list = json::array();
    for (const auto &a : config.antennas) {
        list.push_back({{"position", {a.position.x(), a.position.y()}},
                        {"orientation", {a.orientation.x(), a.orientation.y()}},
                        {"n_senders", a.n_senders}});
    }
    return {{"antennas", list},
            {"domain_size", config.domain_size},
            {"min_distance", config.min_distance},
            {"cutoff_radius", config.cutoff_radius},
            {"codebook", {{"n_elements", config.codebook.n_elements}}}};
}

beam::AntennaConfig antenna_config_from_json(const json &j, const std::string &path)
{
    EnvironmentConfig e = environment_from_json(j, path);
    require(!e.antennas.empty(), join(path, "antennas"), "missing required field");
    return *e.build();
}

json to_json(const trajectory::Trajectory &trajectory, std::uint64_t seed)
{
    json points = json::array();
    for (const auto &p : trajectory.support_points()) {
        points.push_back({p.x(), p.y()});
    }
    return {{"support_points", points}, {"degree", trajectory.degree()}, {"seed", seed},
            {"domain_size", trajectory.domain_size()}};
}

trajectory::Trajectory trajectory_from_json(const json &j, const std::string &path)
{
    ObjectReader r(j, path);
    const json *points = r.raw("support_points");
    require(points && points->is_array() && points->size() >= 2, r.path("support_points"),
            "expected at least two [x, y] points");
    std::vector<beam::Point> sp;
    for (std::size_t i = 0; i < points->size(); ++i) {
        sp.push_back(point_from_json((*points)[i], indexed(r.path("support_points"), i)));
    }
    int degree = static_cast<int>(points->size());
    std::uint64_t seed = 0;
    double domain_size = 6.0;
    r.integer("degree", degree);
    r.integer("seed", seed);
    r.number("domain_size", domain_size);
    r.finish();
    require(degree == static_cast<int>(sp.size()), r.path("degree"), "must equal the number of support points");
    return rethrow_as_config(path, [&] { return trajectory::Trajectory(sp, domain_size); });
}

json to_json(const models::ModelSpec &spec)
{
    if (const auto *c = std::get_if<models::ClassicalSpec>(&spec)) {
        return {{"type", "classical"},
                {"width", c->width},
                {"depth", c->depth},
                {"activation", models::to_string(c->activation)}};
    }
    const auto &h = std::get<models::HybridSpec>(spec);
    return {{"type", "hybrid"},
            {"qubits", h.qubits},
            {"layers", h.layers},
            {"structure", qsim::to_string(h.structure)},
            {"gate_family", qsim::to_string(h.gate_family)},
            {"activation", models::to_string(h.activation)}};
}

models::ModelSpec model_spec_from_json(const json &j, const std::string &path)
{
    ObjectReader r(j, path);
    std::string type = "classical";
    r.string("type", type);
    std::string activation;
    r.string("activation", activation);
    if (type == "classical") {
        models::ClassicalSpec c;
        r.integer("width", c.width);
        r.integer("depth", c.depth);
        if (!activation.empty()) {
            c.activation = rethrow_as_config(r.path("activation"),
                                             [&] { return models::parse_activation(activation); });
        }
        r.finish();
        require(c.width >= 1, r.path("width"), "must be positive");
        require(c.depth >= 1, r.path("depth"), "must be positive");
        return c;
    }
    if (type == "hybrid") {
        models::HybridSpec h;
        std::string structure = qsim::to_string(h.structure);
        std::string family = qsim::to_string(h.gate_family);
        r.integer("qubits", h.qubits);
        r.integer("layers", h.layers);
        r.string("structure", structure);
        r.string("gate_family", family);
        if (!activation.empty()) {
            h.activation = rethrow_as_config(r.path("activation"),
                                             [&] { return models::parse_activation(activation); });
        }
        r.finish();
        h.structure = rethrow_as_config(r.path("structure"),
                                        [&] { return qsim::parse_structure(structure); });
        h.gate_family = rethrow_as_config(r.path("gate_family"),
                                          [&] { return qsim::parse_gate_family(family); });
        rethrow_as_config(r.path("qubits"), [&] {
            qsim::AnsatzSpec{h.structure, h.gate_family, h.qubits, h.layers}.validate();
            return 0;
        });
        return h;
    }
    throw ConfigError(r.path("type"), "expected 'classical' or 'hybrid', got '" + type + "'");
}

ExperimentConfig parse_config(const json &j)
{
    ExperimentConfig c;
    ObjectReader root(j, "");
    root.string("experiment", c.experiment);
    root.string("output", c.output);
    require(!c.experiment.empty() && c.experiment.find('/') == std::string::npos, "experiment",
            "must be a non-empty name without '/'");

    if (const json *e = root.raw("environment")) {
        c.environment = environment_from_json(*e, "environment");
    }
    if (const json *m = root.raw("model")) {
        c.model = model_spec_from_json(*m, "model");
    }
    if (const json *m = root.raw("critic")) {
        c.critic = model_spec_from_json(*m, "critic");
    }

    if (const json *a = root.raw("algorithm")) {
        ObjectReader r(*a, "algorithm");
        std::string name = "ddqn";
        r.string("name", name);
        if (name == "ddqn") {
            c.algorithm = Algorithm::DDQN;
            rl::DdqnConfig &d = c.ddqn;
            std::string variant = rl::to_string(d.variant);
            r.number("epsilon_greedy", d.epsilon_greedy);
            r.number("lr_classical", d.lr_classical);
            r.number("lr_quantum", d.lr_quantum);
            r.number("gamma", d.gamma);
            r.integer("sync_interval", d.sync_interval);
            r.integer("buffer_capacity", d.buffer_capacity);
            r.integer("batch_size", d.batch_size);
            r.integer("epochs", d.epochs);
            r.integer("train_envs", d.train_envs);
            r.integer("validation_envs", d.validation_envs);
            r.string("ddqn_variant", variant);
            r.boolean("fixed_validation_set", d.fixed_validation_set);
            r.finish();
            d.variant = rethrow_as_config(r.path("ddqn_variant"),
                                          [&] { return rl::parse_ddqn_variant(variant); });
            rethrow_as_config("algorithm", [&] {
                d.validate();
                return 0;
            });
        } else if (name == "ppo") {
            c.algorithm = Algorithm::PPO;
            rl::PpoConfig &p = c.ppo;
            p.clip = is_hybrid(c.model) ? 0.2 : 0.1;
            r.number("clip", p.clip);
            r.number("lr_classical", p.lr_classical);
            r.number("lr_quantum", p.lr_quantum);
            r.number("gamma", p.gamma);
            r.number("gae_lambda", p.gae_lambda);
            r.number("value_coef", p.value_coef);
            r.integer("batch_size", p.batch_size);
            r.integer("repeat", p.repeat);
            r.integer("epochs", p.epochs);
            r.integer("train_envs", p.train_envs);
            r.integer("validation_envs", p.validation_envs);
            r.boolean("normalize_advantages", p.normalize_advantages);
            r.boolean("fixed_validation_set", p.fixed_validation_set);
            r.finish();
            rethrow_as_config("algorithm", [&] {
                p.validate();
                return 0;
            });
        } else {
            throw ConfigError("algorithm.name", "expected 'ddqn' or 'ppo', got '" + name + "'");
        }
    }
    require(!(c.critic && c.algorithm == Algorithm::DDQN), "critic",
            "only meaningful for the ppo algorithm");

    if (const json *s = root.raw("sweep")) {
        ObjectReader r(*s, "sweep");
        r.integer("n_seeds", c.sweep.n_seeds);
        r.integer("base_seed", c.sweep.base_seed);
        r.finish();
        require(c.sweep.n_seeds >= 1, "sweep.n_seeds", "must be positive");
    }
    if (const json *s = root.raw("estimator")) {
        ObjectReader r(*s, "estimator");
        r.numbers("epsilons", c.estimator.grid.epsilons);
        r.numbers("deltas", c.estimator.grid.deltas);
        r.integer("n_resamples", c.estimator.n_resamples);
        r.integer("seed", c.estimator.seed);
        r.finish();
        rethrow_as_config("estimator", [&] {
            c.estimator.grid.validate();
            return 0;
        });
        require(c.estimator.n_resamples >= 100, "estimator.n_resamples", "must be at least 100");
    }
    root.finish();
    return c;
}

ExperimentConfig load_config(const fs::path &path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error &e) {
        throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig &c)
{
    json j = {{"experiment", c.experiment},
              {"output", c.output},
              {"environment", environment_to_json(c.environment)},
              {"model", to_json(c.model)}};
    if (c.algorithm == Algorithm::DDQN) {
        const rl::DdqnConfig &d = c.ddqn;
        j["algorithm"] = {{"name", "ddqn"},
                          {"epsilon_greedy", d.epsilon_greedy},
                          {"lr_classical", d.lr_classical},
                          {"lr_quantum", d.lr_quantum},
                          {"gamma", d.gamma},
                          {"sync_interval", d.sync_interval},
                          {"buffer_capacity", d.buffer_capacity},
                          {"batch_size", d.batch_size},
                          {"epochs", d.epochs},
                          {"train_envs", d.train_envs},
                          {"validation_envs", d.validation_envs},
                          {"ddqn_variant", rl::to_string(d.variant)},
                          {"fixed_validation_set", d.fixed_validation_set}};
    } else {
        const rl::PpoConfig &p = c.ppo;
        j["algorithm"] = {{"name", "ppo"},
                          {"clip", p.clip},
                          {"lr_classical", p.lr_classical},
                          {"lr_quantum", p.lr_quantum},
                          {"gamma", p.gamma},
                          {"gae_lambda", p.gae_lambda},
                          {"value_coef", p.value_coef},
                          {"batch_size", p.batch_size},
                          {"repeat", p.repeat},
                          {"epochs", p.epochs},
                          {"train_envs", p.train_envs},
                          {"validation_envs", p.validation_envs},
                          {"normalize_advantages", p.normalize_advantages},
                          {"fixed_validation_set", p.fixed_validation_set}};
    }
    if (c.critic) {
        j["critic"] = to_json(*c.critic);
    }
    j["sweep"] = {{"n_seeds", c.sweep.n_seeds}, {"base_seed", c.sweep.base_seed}};
    j["estimator"] = {{"epsilons", c.estimator.grid.epsilons},
                      {"deltas", c.estimator.grid.deltas},
                      {"n_resamples", c.estimator.n_resamples},
                      {"seed", c.estimator.seed}};
    return j;
}

std::string config_hash(const ExperimentConfig &config)
{
    json j = to_json(config);
    // Only what changes a run's content belongs in the hash.
    j.erase("experiment");
    j.erase("output");
    j.erase("sweep");
    j.erase("estimator");
    return hex64(fnv1a(j.dump()));
}

fs::path output_root(const ExperimentConfig &config)
{
    if (const char *env = std::getenv("BENCH_OUT"); env && *env) {
        return fs::path(env);
    }
    return fs::path(config.output);
}

fs::path run_directory(const ExperimentConfig &config)
{
    return output_root(config) / config.experiment / config_hash(config);
}

fs::path run_log_path(const fs::path &directory, std::uint64_t seed)
{
    return directory / ("run-" + std::to_string(seed) + ".jsonl");
}

fs::path checkpoint_path(const fs::path &directory, std::uint64_t seed)
{
    return directory / ("run-" + std::to_string(seed) + ".ckpt.json");
}

json epoch_record(const std::string &run_id, std::uint64_t seed, const rl::EpochLog &entry)
{
    return {{"run_id", run_id},
            {"seed", seed},
            {"epoch", entry.epoch},
            {"steps", entry.steps},
            {"value", entry.value}};
}

rl::RunLog read_run_log(const fs::path &path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open run log " + path.string());
    }
    rl::RunLog log;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
            log.run_id = j.at("run_id").get<std::string>();
            log.seed = j.at("seed").get<std::uint64_t>();
            rl::EpochLog e;
            e.epoch = j.at("epoch").get<int>();
            e.steps = j.at("steps").get<long>();
            e.value = j.at("value").get<double>();
            log.epochs.push_back(e);
        } catch (const json::exception &ex) {
            throw std::runtime_error("malformed run log line " + where + ": " + ex.what());
        }
        const rl::EpochLog &e = log.epochs.back();
        if (!(e.value >= 0.0 && e.value <= 1.0)) {
            throw std::runtime_error("run log value outside [0, 1] at " + where);
        }
        if (e.epoch != static_cast<int>(log.epochs.size())) {
            throw std::runtime_error("run log epochs out of sequence at " + where);
        }
    }
    if (log.epochs.empty()) {
        throw std::runtime_error("empty run log " + path.string());
    }
    return log;
}

std::vector<std::pair<fs::path, rl::RunLog>> read_run_logs(const fs::path &directory)
{
    if (!fs::is_directory(directory)) {
        throw std::runtime_error("log directory " + directory.string() + " does not exist");
    }
    std::vector<std::pair<std::uint64_t, fs::path>> files;
    for (const auto &entry : fs::directory_iterator(directory)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("run-", 0) != 0 || entry.path().extension() != ".jsonl") {
            continue;
        }
        const std::string digits = name.substr(4, name.size() - 4 - 6);
        if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) {
            continue;
        }
        files.emplace_back(std::stoull(digits), entry.path());
    }
    if (files.empty()) {
        throw std::runtime_error("no run logs in " + directory.string());
    }
    std::sort(files.begin(), files.end());
    std::vector<std::pair<fs::path, rl::RunLog>> logs;
    for (const auto &[seed, path] : files) {
        logs.emplace_back(path, read_run_log(path));
    }
    return logs;
}

stats::RunMatrix load_run_matrix(const fs::path &directory)
{
    const auto logs = read_run_logs(directory);
    const std::size_t t_count = logs.front().second.epochs.size();
    std::string ragged;
    for (const auto &[path, log] : logs) {
        if (log.epochs.size() != t_count) {
            ragged += "\n  " + path.filename().string() + ": " + std::to_string(log.epochs.size()) +
                      " checkpoints";
        }
    }
    if (!ragged.empty()) {
        throw std::runtime_error("ragged run logs in " + directory.string() + " (expected " +
                                 std::to_string(t_count) + " checkpoints, first file " +
                                 logs.front().first.filename().string() + "):" + ragged);
    }
    stats::RunMatrix m;
    m.values.resize(static_cast<Eigen::Index>(logs.size()), static_cast<Eigen::Index>(t_count));
    m.steps_per_checkpoint = logs.front().second.epochs.front().steps;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const auto &epochs = logs[i].second.epochs;
        for (std::size_t t = 0; t < t_count; ++t) {
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = epochs[t].value;
            if (epochs[t].steps != static_cast<long>(t + 1) * m.steps_per_checkpoint) {
                throw std::runtime_error("irregular checkpoint spacing in " +
                                         logs[i].first.filename().string());
            }
        }
    }
    return m;
}

void save_checkpoint(const fs::path &path, const Checkpoint &checkpoint)
{
    json j = {{"algorithm", checkpoint.algorithm},
              {"model", to_json(checkpoint.model)},
              {"input_dim", checkpoint.input_dim},
              {"output_dim", checkpoint.output_dim},
              {"parameters", std::vector<double>(checkpoint.parameters.data(),
                                                 checkpoint.parameters.data() +
                                                     checkpoint.parameters.size())}};
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        out << j.dump() << '\n';
        if (!out) {
            throw std::runtime_error("cannot write checkpoint " + path.string());
        }
    }
    fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path &path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open checkpoint " + path.string());
    }
    const json j = json::parse(in);
    Checkpoint c;
    c.algorithm = j.at("algorithm").get<std::string>();
    c.model = model_spec_from_json(j.at("model"), "model");
    c.input_dim = j.at("input_dim").get<Eigen::Index>();
    c.output_dim = j.at("output_dim").get<Eigen::Index>();
    const auto p = j.at("parameters").get<std::vector<double>>();
    c.parameters = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
    return c;
}

std::unique_ptr<models::Network> restore_network(const Checkpoint &checkpoint)
{
    auto net = models::make_network(checkpoint.model, checkpoint.input_dim, checkpoint.output_dim, 0);
    if (net->n_parameters() != checkpoint.parameters.size()) {
        throw std::invalid_argument("checkpoint holds " + std::to_string(checkpoint.parameters.size()) +
                                    " parameters but the model shape needs " +
                                    std::to_string(net->n_parameters()));
    }
    net->parameters() = checkpoint.parameters;
    return net;
}

SeedRange parse_seed_range(const std::string &text)
{
    const auto dots = text.find("..");
    try {
        if (dots == std::string::npos) {
            const std::uint64_t s = std::stoull(text);
            return {s, s};
        }
        const SeedRange r{std::stoull(text.substr(0, dots)), std::stoull(text.substr(dots + 2))};
        if (r.last < r.first) {
            throw std::invalid_argument("empty");
        }
        return r;
    } catch (const std::exception &) {
        throw std::invalid_argument("invalid seed range '" + text + "' (expected A..B)");
    }
}

std::vector<double> parse_number_list(const std::string &text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument("trailing");
            }
        } catch (const std::exception &) {
            throw std::invalid_argument("invalid number '" + item + "' in list '" + text + "'");
        }
    }
    if (out.empty()) {
        throw std::invalid_argument("empty number list");
    }
    return out;
}

rl::RunLog train_run(const ExperimentConfig &config, std::uint64_t seed, const fs::path &directory)
{
    fs::create_directories(directory);
    const rl::EnvFactory factory{config.environment.build(), config.environment.settings};
    const fs::path log_path = run_log_path(directory, seed);
    std::ofstream out(log_path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write run log " + log_path.string());
    }
    const std::string run_id = config.experiment + "/" + config_hash(config) + "/" + std::to_string(seed);
    Checkpoint ckpt;
    auto on_epoch = [&](const rl::EpochLog &entry, const models::Network &net) {
        out << epoch_record(run_id, seed, entry).dump() << '\n';
        out.flush();
        ckpt.model = net.spec();
        ckpt.input_dim = net.input_dim();
        ckpt.output_dim = net.output_dim();
        ckpt.parameters = net.parameters();
    };
    rl::RunLog log;
    if (config.algorithm == Algorithm::DDQN) {
        ckpt.algorithm = "ddqn";
        log = rl::ddqn_train(factory, config.model, config.ddqn, seed, on_epoch);
    } else {
        ckpt.algorithm = "ppo";
        log = rl::ppo_train(factory, config.model, config.critic.value_or(config.model), config.ppo,
                            seed, on_epoch);
    }
    log.run_id = run_id;
    save_checkpoint(checkpoint_path(directory, seed), ckpt);
    return log;
}

TrainSummary cmd_train(const ExperimentConfig &config, const TrainOptions &options)
{
    TrainSummary summary;
    summary.directory = run_directory(config);
    fs::create_directories(summary.directory);
    {
        std::ofstream cfg(summary.directory / "config.json", std::ios::trunc);
        cfg << to_json(config).dump(2) << '\n';
    }

    SeedRange range{config.sweep.base_seed, config.sweep.base_seed + config.sweep.n_seeds - 1};
    if (options.seeds) {
        range = *options.seeds;
    }
    const int epochs =
        config.algorithm == Algorithm::DDQN ? config.ddqn.epochs : config.ppo.epochs;

    std::vector<std::uint64_t> pending;
    for (std::uint64_t s = range.first;; ++s) {
        if (run_is_complete(summary.directory, s, epochs)) {
            summary.skipped.push_back(run_log_path(summary.directory, s));
        } else {
            pending.push_back(s);
        }
        if (s == range.last) {
            break;
        }
    }

    std::mutex mutex;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    auto worker = [&] {
        for (std::size_t i = next++; i < pending.size(); i = next++) {
            {
                std::lock_guard lock(mutex);
                if (failure) {
                    return;
                }
            }
            try {
                const rl::RunLog log = train_run(config, pending[i], summary.directory);
                std::lock_guard lock(mutex);
                summary.trained.push_back(run_log_path(summary.directory, pending[i]));
                if (options.progress) {
                    *options.progress << "seed " << pending[i] << ": final value "
                                      << log.epochs.back().value << '\n';
                }
            } catch (...) {
                std::lock_guard lock(mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    };
    const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(pending.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int k = 0; k < jobs; ++k) {
            threads.emplace_back(worker);
        }
        for (auto &t : threads) {
            t.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    std::sort(summary.trained.begin(), summary.trained.end());
    return summary;
}

std::vector<stats::ComplexityCell> cmd_complexity(const fs::path &log_dir,
                                                  const EstimatorConfig &estimator,
                                                  std::ostream &csv)
{
    const stats::RunMatrix m = load_run_matrix(log_dir);
    const auto cells = stats::complexity_table(m, estimator.grid, estimator.n_resamples, estimator.seed);
    csv << "epsilon,delta,s_hat_checkpoints,s_hat_interactions,p5,p95,saturated\n";
    for (const auto &c : cells) {
        write_number(csv, c.epsilon);
        csv << ',';
        write_number(csv, c.delta);
        csv << ',' << c.s_hat << ',' << c.s_hat_interactions << ',';
        write_number(csv, c.interval.p5);
        csv << ',';
        write_number(csv, c.interval.p95);
        csv << ',' << (c.saturated ? "true" : "false") << '\n';
    }
    return cells;
}

stats::OutperformanceVerdict cmd_compare(const fs::path &dir_a, const fs::path &dir_b,
                                         const EstimatorConfig &estimator, std::ostream &csv)
{
    const stats::RunMatrix a = load_run_matrix(dir_a);
    const stats::RunMatrix b = load_run_matrix(dir_b);
    if (a.n_checkpoints() != b.n_checkpoints()) {
        throw std::invalid_argument("log directories differ in checkpoint count: " +
                                    std::to_string(a.n_checkpoints()) + " in " + dir_a.string() +
                                    ", " + std::to_string(b.n_checkpoints()) + " in " + dir_b.string());
    }
    const auto verdict = stats::outperforms(a, b, estimator.grid, estimator.n_resamples, estimator.seed);
    csv << "epsilon,delta,a_s_hat,a_p5,a_p95,b_s_hat,b_p5,b_p95,significance\n";
    for (const auto &c : verdict.table) {
        write_number(csv, c.a.epsilon);
        csv << ',';
        write_number(csv, c.a.delta);
        csv << ',' << c.a.s_hat << ',';
        write_number(csv, c.a.interval.p5);
        csv << ',';
        write_number(csv, c.a.interval.p95);
        csv << ',' << c.b.s_hat << ',';
        write_number(csv, c.b.interval.p5);
        csv << ',';
        write_number(csv, c.b.interval.p95);
        csv << ',' << stats::to_string(c.significance) << '\n';
    }
    return verdict;
}

long cmd_render(const EnvironmentConfig &environment, int resolution, std::ostream &csv)
{
    if (resolution < 1) {
        throw std::invalid_argument("render resolution must be positive");
    }
    const auto config = environment.build();
    const double cell = config->domain_size / resolution;
    csv << "x,y,antenna,intensity\n";
    long rows = 0;
    for (int iy = 0; iy < resolution; ++iy) {
        for (int ix = 0; ix < resolution; ++ix) {
            const beam::Point p{(ix + 0.5) * cell, (iy + 0.5) * cell};
            const beam::Selection s = beam::ground_truth(*config, p);
            write_number(csv, p.x());
            csv << ',';
            write_number(csv, p.y());
            csv << ',' << s.antenna << ',';
            write_number(csv, s.intensity);
            csv << '\n';
            ++rows;
        }
    }
    return rows;
}

std::vector<double> default_bias_grid()
{
    std::vector<double> grid;
    for (int k = 5; k <= 95; ++k) {
        grid.push_back(k / 100.0);
    }
    return grid;
}

std::vector<BiasCurve> cmd_biascheck(int n_runs, const std::vector<double> &deltas, int n_trials,
                                     std::uint64_t seed, std::ostream &csv,
                                     const std::vector<double> &p_grid)
{
    std::vector<BiasCurve> curves;
    csv << "delta,p_t,empirical,clt_reference\n";
    for (double delta : deltas) {
        BiasCurve c{delta, stats::bias_curve(n_runs, delta, p_grid, n_trials, seed)};
        for (const auto &p : c.points) {
            write_number(csv, delta);
            csv << ',';
            write_number(csv, p.p_t);
            csv << ',';
            write_number(csv, p.empirical);
            csv << ',';
            write_number(csv, p.clt_reference);
            csv << '\n';
        }
        curves.push_back(std::move(c));
    }
    return curves;
}

EvaluationSummary cmd_evaluate(const Checkpoint &checkpoint, const EnvironmentConfig &environment,
                               int n_episodes, std::uint64_t seed, std::ostream &csv)
{
    if (n_episodes < 1) {
        throw std::invalid_argument("evaluation needs at least one episode");
    }
    const rl::EnvFactory factory{environment.build(), environment.settings};
    const auto net = restore_network(checkpoint);
    env::BeamManagementEnv probe = factory.make();
    if (net->input_dim() != probe.observation_dim() || net->output_dim() != probe.n_actions()) {
        throw std::invalid_argument(
            "checkpoint shape " + std::to_string(net->input_dim()) + "->" +
            std::to_string(net->output_dim()) + " does not match environment " +
            std::to_string(probe.observation_dim()) + "->" + std::to_string(probe.n_actions()));
    }

    Rng rng = make_rng(derive_seed(seed, Stream::Evaluation, 0));
    EvaluationSummary summary;
    summary.episodes = n_episodes;
    csv << "episode,policy,random,optimal,relative_return\n";
    auto sum = [](const std::vector<double> &v) {
        double s = 0.0;
        for (double x : v) {
            s += x;
        }
        return s;
    };
    for (int k = 0; k < n_episodes; ++k) {
        const std::uint64_t traj_seed = derive_seed(seed, Stream::Evaluation, static_cast<std::uint64_t>(k) + 1);
        env::BeamManagementEnv policy_env = factory.make();
        env::BeamManagementEnv random_env = factory.make();
        Eigen::VectorXd obs = policy_env.reset(traj_seed);
        random_env.reset(traj_seed);
        while (!policy_env.done()) {
            const Eigen::VectorXd q = net->predict(obs).col(0);
            obs = policy_env.step(rl::argmax(q)).observation;
            random_env.step(static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(random_env.n_actions()))));
        }
        const double policy = sum(policy_env.record().rewards);
        const double random = sum(random_env.record().rewards);
        const double optimal = sum(policy_env.record().optimal);
        const double rel = env::relative_return(policy_env.record());
        csv << k << ',';
        write_number(csv, policy);
        csv << ',';
        write_number(csv, random);
        csv << ',';
        write_number(csv, optimal);
        csv << ',';
        write_number(csv, rel);
        csv << '\n';
        summary.mean_policy += policy;
        summary.mean_random += random;
        summary.mean_optimal += optimal;
        summary.mean_relative_return += rel;
    }
    summary.mean_policy /= n_episodes;
    summary.mean_random /= n_episodes;
    summary.mean_optimal /= n_episodes;
    summary.mean_relative_return /= n_episodes;
    return summary;
}

} // namespace qrlbench::bench
