#include "edgeslice/harness.hpp"

#include "edgeslice/text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <charconv>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

namespace edgeslice {

using nlohmann::json;

std::string to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::edgeslice: return "edgeslice";
        case PolicyKind::edgeslice_nt: return "edgeslice-nt";
        case PolicyKind::taro: return "taro";
        case PolicyKind::oracle: return "oracle";
    }
    return "?";
}

PolicyKind policy_from_string(const std::string& name) {
    if (name == "edgeslice") return PolicyKind::edgeslice;
    if (name == "edgeslice-nt") return PolicyKind::edgeslice_nt;
    if (name == "taro") return PolicyKind::taro;
    if (name == "oracle") return PolicyKind::oracle;
    throw ConfigError("unknown policy '" + name + "' (expected edgeslice, edgeslice-nt, taro or oracle)");
}

bool is_learned(PolicyKind kind) { return kind == PolicyKind::edgeslice || kind == PolicyKind::edgeslice_nt; }

StateLayout layout_for(PolicyKind kind) {
    if (!is_learned(kind)) throw ConfigError("policy " + to_string(kind) + " has no agent");
    return kind == PolicyKind::edgeslice ? StateLayout::full : StateLayout::coordination_only;
}

Vector ExperimentConfig::u_min() const {
    Vector u(num_slices());
    for (int i = 0; i < num_slices(); ++i) u(i) = slices[static_cast<std::size_t>(i)].u_min;
    return u;
}

double ExperimentConfig::performance_scale() const {
    if (coordination.performance_scale > 0.0) return coordination.performance_scale;
    double scale = 1.0;
    for (const auto& s : slices) scale = std::max(scale, std::abs(s.u_min));
    return scale;
}

void validate(const ExperimentConfig& c) {
    if (c.num_resources < 1) throw ConfigError("num_resources must be >= 1");
    if (c.slices.empty()) throw ConfigError("at least one slice is required");
    if (c.ras.empty()) throw ConfigError("at least one RA is required");
    if (c.period_len < 1) throw ConfigError("period_len must be >= 1");
    if (!(c.rho > 0.0)) throw ConfigError("rho must be positive");
    if (!(c.beta >= 0.0)) throw ConfigError("beta must be non-negative");

    std::set<int> ids;
    for (const auto& s : c.slices) {
        validate(s, c.num_resources);
        if (!ids.insert(s.id).second) throw ConfigError("duplicate slice id " + std::to_string(s.id));
    }
    ids.clear();
    for (const auto& r : c.ras) {
        validate(r, c.num_resources);
        if (!ids.insert(r.id).second) throw ConfigError("duplicate RA id " + std::to_string(r.id));
    }
    if (c.traffic.size() != c.slices.size()) throw ConfigError("traffic needs one row per slice");
    for (const auto& row : c.traffic) {
        if (row.size() != c.ras.size()) throw ConfigError("traffic needs one source per (slice, RA)");
        for (const auto& src : row) validate(src);
    }

    const auto& a = c.agent;
    if (a.train_steps < 0) throw ConfigError("agent.train_steps must be >= 0");
    if (!(a.coordination_low <= a.coordination_high)) {
        throw ConfigError("agent.coordination_low must not exceed coordination_high");
    }
    if (a.ddpg.batch_size < 1) throw ConfigError("agent.batch_size must be >= 1");
    if (a.ddpg.replay_capacity < static_cast<std::size_t>(a.ddpg.batch_size)) {
        throw ConfigError("agent.replay_capacity must hold at least one batch");
    }
    if (a.ddpg.hidden.empty()) throw ConfigError("agent.hidden needs at least one layer");
    for (int h : a.ddpg.hidden) {
        if (h < 1) throw ConfigError("agent.hidden sizes must be >= 1");
    }
    if (!(a.ddpg.gamma >= 0.0 && a.ddpg.gamma < 1.0)) throw ConfigError("agent.gamma must lie in [0, 1)");
    if (!(a.ddpg.tau >= 0.0 && a.ddpg.tau <= 1.0)) throw ConfigError("agent.tau must lie in [0, 1]");
    if (!(a.ddpg.actor_lr > 0.0) || !(a.ddpg.critic_lr > 0.0)) throw ConfigError("learning rates must be positive");
    if (!(a.scales.queue > 0.0) || !(a.scales.coordination > 0.0)) throw ConfigError("state scales must be positive");

    const auto& k = c.coordination;
    if (k.max_iterations < 1) throw ConfigError("coordination.max_iterations must be >= 1");
    if (k.window < 1) throw ConfigError("coordination.window must be >= 1");
    if (k.evaluation_window < 1) throw ConfigError("coordination.evaluation_window must be >= 1");
    if (!(k.tolerance > 0.0)) throw ConfigError("coordination.tolerance must be positive");
    if (k.performance_scale < 0.0) throw ConfigError("coordination.performance_scale must be >= 0");

    grid_steps(c.oracle.grid_step);
    if (c.service.mode == ServiceModel::Mode::regression) {
        grid_steps(c.service.granularity);
        if (c.service.neighborhood < 1) throw ConfigError("service_model.neighborhood must be >= 1");
    }
}

// ---------------------------------------------------------------------------
// JSON

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || item.key() == a;
        if (!known) throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

template <class T>
T require(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
    return get_or<T>(obj, key, T{});
}

Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> from_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

TrafficSource parse_source(const json& j, const std::string& where, std::initializer_list<const char*> extra = {}) {
    std::vector<const char*> allowed{"poisson", "trace", "repeat"};
    allowed.insert(allowed.end(), extra.begin(), extra.end());
    for (const auto& item : j.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return item.key() == a; }) ==
            allowed.end()) {
            throw ConfigError(where + ": unknown key '" + item.key() + "'");
        }
    }
    const bool poisson = j.contains("poisson");
    const bool trace = j.contains("trace");
    if (poisson == trace) throw ConfigError(where + ": give exactly one of 'poisson' or 'trace'");
    TrafficSource src;
    if (poisson) {
        src = PoissonTraffic{get_or<double>(j, "poisson", 0.0)};
    } else {
        src = TraceTraffic{get_or<std::vector<double>>(j, "trace", {}), get_or<bool>(j, "repeat", true)};
    }
    validate(src);
    return src;
}

json source_to_json(const TrafficSource& src) {
    if (const auto* p = std::get_if<PoissonTraffic>(&src)) return {{"poisson", p->rate}};
    const auto& t = std::get<TraceTraffic>(src);
    return {{"trace", t.series}, {"repeat", t.repeat}};
}

int index_of_slice(const ExperimentConfig& c, int id) {
    for (int i = 0; i < c.num_slices(); ++i) {
        if (c.slices[static_cast<std::size_t>(i)].id == id) return i;
    }
    throw ConfigError("unknown slice id " + std::to_string(id));
}

int index_of_ra(const ExperimentConfig& c, int id) {
    for (int j = 0; j < c.num_ras(); ++j) {
        if (c.ras[static_cast<std::size_t>(j)].id == id) return j;
    }
    throw ConfigError("unknown RA id " + std::to_string(id));
}

json agent_to_json(const AgentSettings& a) {
    return {{"hidden", a.ddpg.hidden},
            {"actor_lr", a.ddpg.actor_lr},
            {"critic_lr", a.ddpg.critic_lr},
            {"gamma", a.ddpg.gamma},
            {"tau", a.ddpg.tau},
            {"batch_size", a.ddpg.batch_size},
            {"replay_capacity", a.ddpg.replay_capacity},
            {"noise_std", a.ddpg.noise_std},
            {"noise_decay", a.ddpg.noise_decay},
            {"leaky_slope", a.ddpg.leaky_slope},
            {"reward_scale", a.ddpg.reward_scale},
            {"preactivation_l2", a.ddpg.preactivation_l2},
            {"symlog_rewards", a.ddpg.symlog_rewards},
            {"train_steps", a.train_steps},
            {"coordination_low", a.coordination_low},
            {"coordination_high", a.coordination_high},
            {"initial_queue_max", a.initial_queue_max},
            {"validation_every", a.validation_every},
            {"validation_episodes", a.validation_episodes},
            {"queue_scale", a.scales.queue},
            {"coordination_scale", a.scales.coordination}};
}

AgentSettings parse_agent(const json& j) {
    check_keys(j, "agent",
               {"hidden", "actor_lr", "critic_lr", "gamma", "tau", "batch_size", "replay_capacity", "noise_std",
                "noise_decay", "leaky_slope", "reward_scale", "preactivation_l2", "symlog_rewards", "train_steps",
                "coordination_low", "coordination_high", "initial_queue_max", "queue_scale",
                "coordination_scale", "validation_every", "validation_episodes"});
    AgentSettings a;
    auto& d = a.ddpg;
    d.hidden = get_or(j, "hidden", d.hidden);
    d.actor_lr = get_or(j, "actor_lr", d.actor_lr);
    d.critic_lr = get_or(j, "critic_lr", d.critic_lr);
    d.gamma = get_or(j, "gamma", d.gamma);
    d.tau = get_or(j, "tau", d.tau);
    d.batch_size = get_or(j, "batch_size", d.batch_size);
    d.replay_capacity = get_or(j, "replay_capacity", d.replay_capacity);
    d.noise_std = get_or(j, "noise_std", d.noise_std);
    d.noise_decay = get_or(j, "noise_decay", d.noise_decay);
    d.leaky_slope = get_or(j, "leaky_slope", d.leaky_slope);
    d.reward_scale = get_or(j, "reward_scale", d.reward_scale);
    d.preactivation_l2 = get_or(j, "preactivation_l2", d.preactivation_l2);
    d.symlog_rewards = get_or(j, "symlog_rewards", d.symlog_rewards);
    a.train_steps = get_or(j, "train_steps", a.train_steps);
    a.coordination_low = get_or(j, "coordination_low", a.coordination_low);
    a.coordination_high = get_or(j, "coordination_high", a.coordination_high);
    a.initial_queue_max = get_or(j, "initial_queue_max", a.initial_queue_max);
    a.validation_every = get_or(j, "validation_every", a.validation_every);
    a.validation_episodes = get_or(j, "validation_episodes", a.validation_episodes);
    if (a.validation_every < 0) throw ConfigError("agent.validation_every must be >= 0");
    if (a.validation_episodes < 1) throw ConfigError("agent.validation_episodes must be >= 1");
    a.scales.queue = get_or(j, "queue_scale", a.scales.queue);
    a.scales.coordination = get_or(j, "coordination_scale", a.scales.coordination);
    return a;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(root, "config",
               {"name", "seed", "num_resources", "period_len", "rho", "beta", "policy", "slices", "ras", "traffic",
                "service_model", "agent", "coordination", "oracle"});

    ExperimentConfig c;
    c.name = get_or<std::string>(root, "name", c.name);
    c.seed = get_or<std::uint64_t>(root, "seed", c.seed);
    c.num_resources = get_or(root, "num_resources", c.num_resources);
    c.period_len = get_or(root, "period_len", c.period_len);
    c.rho = get_or(root, "rho", c.rho);
    c.beta = get_or(root, "beta", c.beta);
    c.policy = policy_from_string(get_or<std::string>(root, "policy", to_string(c.policy)));

    if (!root.contains("slices") || !root["slices"].is_array()) throw ConfigError("config: 'slices' array required");
    for (const auto& js : root["slices"]) {
        check_keys(js, "slice", {"id", "u_min", "alpha", "demand_weights"});
        SliceSpec s;
        s.id = require<int>(js, "id", "slice");
        s.u_min = get_or(js, "u_min", s.u_min);
        s.alpha = get_or(js, "alpha", s.alpha);
        s.demand_weights = to_vector(require<std::vector<double>>(js, "demand_weights", "slice"));
        c.slices.push_back(std::move(s));
    }
    if (!root.contains("ras") || !root["ras"].is_array()) throw ConfigError("config: 'ras' array required");
    for (const auto& jr : root["ras"]) {
        check_keys(jr, "ra", {"id", "capacity", "service_coeff"});
        RASpec r;
        r.id = require<int>(jr, "id", "ra");
        r.capacity = to_vector(require<std::vector<double>>(jr, "capacity", "ra"));
        r.service_coeff = get_or(jr, "service_coeff", r.service_coeff);
        c.ras.push_back(std::move(r));
    }

    // Traffic: default source, then a trace file, then explicit per-pair overrides.
    const int I = c.num_slices();
    const int J = c.num_ras();
    std::vector<std::vector<std::optional<TrafficSource>>> grid(
        static_cast<std::size_t>(I), std::vector<std::optional<TrafficSource>>(static_cast<std::size_t>(J)));
    if (root.contains("traffic")) {
        const json& jt = root["traffic"];
        check_keys(jt, "traffic", {"default", "trace_file", "overrides"});
        if (jt.contains("default")) {
            const TrafficSource d = parse_source(jt["default"], "traffic.default");
            for (auto& row : grid) std::fill(row.begin(), row.end(), d);
        }
        if (jt.contains("trace_file")) {
            const json& jf = jt["trace_file"];
            check_keys(jf, "traffic.trace_file", {"path", "target_mean", "repeat"});
            std::filesystem::path p = require<std::string>(jf, "path", "traffic.trace_file");
            if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
            std::vector<int> slice_ids, ra_ids;
            for (const auto& s : c.slices) slice_ids.push_back(s.id);
            for (const auto& r : c.ras) ra_ids.push_back(r.id);
            const auto sources = ingest_trace(p, slice_ids, ra_ids, get_or(jf, "target_mean", 0.0), get_or(jf, "repeat", true));
            for (int i = 0; i < I; ++i) {
                for (int j = 0; j < J; ++j) {
                    grid[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                        sources[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                }
            }
        }
        if (jt.contains("overrides")) {
            for (const auto& jo : jt["overrides"]) {
                const int i = index_of_slice(c, require<int>(jo, "slice", "traffic override"));
                const int j = index_of_ra(c, require<int>(jo, "ra", "traffic override"));
                grid[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    parse_source(jo, "traffic override", {"slice", "ra"});
            }
        }
    }
    c.traffic.assign(static_cast<std::size_t>(I), {});
    for (int i = 0; i < I; ++i) {
        for (int j = 0; j < J; ++j) {
            const auto& src = grid[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (!src) {
                throw ConfigError("no traffic for slice " + std::to_string(c.slices[static_cast<std::size_t>(i)].id) +
                                  " in RA " + std::to_string(c.ras[static_cast<std::size_t>(j)].id));
            }
            c.traffic[static_cast<std::size_t>(i)].push_back(*src);
        }
    }

    if (root.contains("service_model")) {
        const json& js = root["service_model"];
        check_keys(js, "service_model", {"kind", "granularity", "neighborhood"});
        const auto kind = get_or<std::string>(js, "kind", "bottleneck");
        if (kind == "bottleneck") {
            c.service.mode = ServiceModel::Mode::bottleneck;
        } else if (kind == "regression") {
            c.service.mode = ServiceModel::Mode::regression;
        } else {
            throw ConfigError("service_model.kind must be 'bottleneck' or 'regression'");
        }
        c.service.granularity = get_or(js, "granularity", c.service.granularity);
        c.service.neighborhood = get_or(js, "neighborhood", c.service.neighborhood);
    }
    if (root.contains("agent")) c.agent = parse_agent(root["agent"]);
    if (root.contains("coordination")) {
        const json& jc = root["coordination"];
        check_keys(jc, "coordination",
                   {"max_iterations", "tolerance", "performance_scale", "window", "evaluation_window",
                    "reset_queues_each_period"});
        auto& k = c.coordination;
        k.max_iterations = get_or(jc, "max_iterations", k.max_iterations);
        k.tolerance = get_or(jc, "tolerance", k.tolerance);
        k.performance_scale = get_or(jc, "performance_scale", k.performance_scale);
        k.window = get_or(jc, "window", k.window);
        k.evaluation_window = get_or(jc, "evaluation_window", k.evaluation_window);
        k.reset_queues_each_period = get_or(jc, "reset_queues_each_period", k.reset_queues_each_period);
    }
    if (root.contains("oracle")) {
        const json& jo = root["oracle"];
        check_keys(jo, "oracle", {"grid_step", "max_enumeration"});
        c.oracle.grid_step = get_or(jo, "grid_step", c.oracle.grid_step);
        c.oracle.max_enumeration = get_or(jo, "max_enumeration", c.oracle.max_enumeration);
    }
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config not found: " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& c) {
    json root;
    root["name"] = c.name;
    root["seed"] = c.seed;
    root["num_resources"] = c.num_resources;
    root["period_len"] = c.period_len;
    root["rho"] = c.rho;
    root["beta"] = c.beta;
    root["policy"] = to_string(c.policy);
    root["slices"] = json::array();
    for (const auto& s : c.slices) {
        root["slices"].push_back(
            {{"id", s.id}, {"u_min", s.u_min}, {"alpha", s.alpha}, {"demand_weights", from_vector(s.demand_weights)}});
    }
    root["ras"] = json::array();
    for (const auto& r : c.ras) {
        root["ras"].push_back(
            {{"id", r.id}, {"capacity", from_vector(r.capacity)}, {"service_coeff", r.service_coeff}});
    }
    json overrides = json::array();
    for (int i = 0; i < c.num_slices(); ++i) {
        for (int j = 0; j < c.num_ras(); ++j) {
            json o = source_to_json(c.traffic[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
            o["slice"] = c.slices[static_cast<std::size_t>(i)].id;
            o["ra"] = c.ras[static_cast<std::size_t>(j)].id;
            overrides.push_back(std::move(o));
        }
    }
    root["traffic"] = {{"overrides", overrides}};
    root["service_model"] = {
        {"kind", c.service.mode == ServiceModel::Mode::bottleneck ? "bottleneck" : "regression"},
        {"granularity", c.service.granularity},
        {"neighborhood", c.service.neighborhood}};
    root["agent"] = agent_to_json(c.agent);
    root["coordination"] = {{"max_iterations", c.coordination.max_iterations},
                            {"tolerance", c.coordination.tolerance},
                            {"performance_scale", c.coordination.performance_scale},
                            {"window", c.coordination.window},
                            {"evaluation_window", c.coordination.evaluation_window},
                            {"reset_queues_each_period", c.coordination.reset_queues_each_period}};
    root["oracle"] = {{"grid_step", c.oracle.grid_step}, {"max_enumeration", c.oracle.max_enumeration}};
    return root.dump(2) + "\n";
}

Environment make_environment(const ExperimentConfig& c) {
    validate(c);
    ServiceModel service = ServiceModel::bottleneck();
    if (c.service.mode == ServiceModel::Mode::regression) {
        std::vector<RegressionOracle> oracles;
        for (const auto& s : c.slices) {
            const Vector w = s.demand_weights;
            auto truth = [w](const Vector& f) { return bottleneck_service(f, w, 1.0); };
            oracles.emplace_back(build_grid_dataset(truth, c.num_resources, c.service.granularity),
                                 c.service.neighborhood);
        }
        service = ServiceModel::regression(std::move(oracles));
    }
    return Environment(c.slices, c.ras, c.traffic, std::move(service));
}

// ---------------------------------------------------------------------------
// Traces

std::vector<std::vector<TrafficSource>> ingest_trace(std::istream& in, const std::vector<int>& slice_ids,
                                                     const std::vector<int>& ra_ids, double target_mean, bool repeat) {
    const int num_slices = static_cast<int>(slice_ids.size());
    const int num_ras = static_cast<int>(ra_ids.size());
    if (num_slices < 1 || num_ras < 1) throw ConfigError("trace: need at least one slice and one RA");
    auto index_in = [](const std::vector<int>& ids, long id) {
        const auto it = std::find(ids.begin(), ids.end(), id);
        return it == ids.end() ? -1L : static_cast<long>(it - ids.begin());
    };
    std::map<std::tuple<int, int, long>, double> counts;
    long max_interval = -1;
    std::string line;
    long lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const std::string where = "trace line " + std::to_string(lineno);
        if (!header) {
            if (line != "interval_index,slice_id,ra_id,arrival_count") {
                throw ConfigError(where + ": expected header interval_index,slice_id,ra_id,arrival_count");
            }
            header = true;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 4) throw ConfigError(where + ": expected 4 fields, found " + std::to_string(cells.size()));
        long idx = 0;
        long slice = 0;
        long ra = 0;
        for (auto [text, out] : {std::pair{&cells[0], &idx}, std::pair{&cells[1], &slice}, std::pair{&cells[2], &ra}}) {
            const auto res = std::from_chars(text->data(), text->data() + text->size(), *out);
            if (res.ec != std::errc{} || res.ptr != text->data() + text->size()) {
                throw ConfigError(where + ": bad integer '" + *text + "'");
            }
        }
        const double count = text_io::parse_double(cells[3], where);
        if (idx < 0) throw ConfigError(where + ": negative interval index");
        slice = index_in(slice_ids, slice);
        ra = index_in(ra_ids, ra);
        if (slice < 0) throw ConfigError(where + ": unknown slice " + cells[1]);
        if (ra < 0) throw ConfigError(where + ": unknown RA " + cells[2]);
        if (!std::isfinite(count) || count < 0.0) throw ConfigError(where + ": negative arrival count " + cells[3]);
        if (!counts.emplace(std::tuple{static_cast<int>(slice), static_cast<int>(ra), idx}, count).second) {
            throw ConfigError(where + ": duplicate row for interval " + cells[0]);
        }
        max_interval = std::max(max_interval, idx);
    }
    if (!header) throw ConfigError("trace is empty");
    if (counts.empty()) throw ConfigError("trace has a header but no rows");

    std::vector<std::vector<TrafficSource>> out(static_cast<std::size_t>(num_slices));
    for (int i = 0; i < num_slices; ++i) {
        for (int j = 0; j < num_ras; ++j) {
            TraceTraffic t;
            t.repeat = repeat;
            t.series.assign(static_cast<std::size_t>(max_interval + 1), 0.0);
            for (long n = 0; n <= max_interval; ++n) {
                if (auto it = counts.find({i, j, n}); it != counts.end()) t.series[static_cast<std::size_t>(n)] = it->second;
            }
            if (target_mean > 0.0) {
                double mean = 0.0;
                for (double v : t.series) mean += v;
                mean /= static_cast<double>(t.series.size());
                if (mean > 0.0) {
                    for (double& v : t.series) v *= target_mean / mean;
                }
            }
            out[static_cast<std::size_t>(i)].push_back(std::move(t));
        }
    }
    return out;
}

std::vector<std::vector<TrafficSource>> ingest_trace(const std::filesystem::path& path,
                                                     const std::vector<int>& slice_ids, const std::vector<int>& ra_ids,
                                                     double target_mean, bool repeat) {
    std::ifstream in(path);
    if (!in) throw ConfigError("trace file not found: " + path.string());
    try {
        return ingest_trace(in, slice_ids, ra_ids, target_mean, repeat);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32)};
    for (auto t : tags) {
        words.push_back(static_cast<std::uint32_t>(t));
        words.push_back(static_cast<std::uint32_t>(t >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// ---------------------------------------------------------------------------
// Agents

namespace {

/// Everything that determines the outcome of training the agent of RA `j`.
std::string training_key(const ExperimentConfig& c, int j, int owner_id, StateLayout layout) {
    json key;
    key["seed"] = c.seed;
    key["owner"] = owner_id;
    key["layout"] = layout == StateLayout::full ? "full" : "nt";
    key["period_len"] = c.period_len;
    key["rho"] = c.rho;
    key["beta"] = c.beta;
    key["agent"] = agent_to_json(c.agent);
    key["service"] = {c.service.mode == ServiceModel::Mode::bottleneck, c.service.granularity, c.service.neighborhood};
    for (std::size_t i = 0; i < c.slices.size(); ++i) {
        const auto& s = c.slices[i];
        key["slices"].push_back({s.alpha, from_vector(s.demand_weights),
                                 source_to_json(c.traffic[i][static_cast<std::size_t>(j)])});
    }
    const auto& r = c.ras[static_cast<std::size_t>(j)];
    key["ra"] = {from_vector(r.capacity), r.service_coeff};
    return key.dump();
}

/// Profile of RA j alone, used to find RAs that can share an agent.
std::string profile_key(const ExperimentConfig& c, int j) {
    json key;
    const auto& r = c.ras[static_cast<std::size_t>(j)];
    key["ra"] = {from_vector(r.capacity), r.service_coeff};
    for (std::size_t i = 0; i < c.slices.size(); ++i) {
        key["traffic"].push_back(source_to_json(c.traffic[i][static_cast<std::size_t>(j)]));
    }
    return key.dump();
}

std::uint64_t layout_tag(StateLayout layout) { return layout == StateLayout::full ? 1 : 2; }

using AgentCache = std::map<std::string, std::pair<std::shared_ptr<DdpgAgent>, TrainResult>>;

TrainedAgents train_agents_cached(const ExperimentConfig& c, StateLayout layout, const ProgressFn& progress,
                                  AgentCache* cache) {
    validate(c);
    const Environment env = make_environment(c);
    TrainedAgents out;
    out.layout = layout;
    out.per_ra.resize(static_cast<std::size_t>(c.num_ras()));
    out.group.resize(static_cast<std::size_t>(c.num_ras()));
    out.curves.resize(static_cast<std::size_t>(c.num_ras()));
    std::map<std::string, int> first_of_profile;

    for (int j = 0; j < c.num_ras(); ++j) {
        const auto [it, fresh] = first_of_profile.emplace(profile_key(c, j), j);
        out.group[static_cast<std::size_t>(j)] = it->second;
        if (!fresh) {
            out.per_ra[static_cast<std::size_t>(j)] = out.per_ra[static_cast<std::size_t>(it->second)];
            continue;
        }
        const auto& ra = c.ras[static_cast<std::size_t>(j)];
        const std::string key = training_key(c, j, ra.id, layout);
        if (cache) {
            if (auto hit = cache->find(key); hit != cache->end()) {
                out.per_ra[static_cast<std::size_t>(j)] = hit->second.first;
                out.curves[static_cast<std::size_t>(j)] = hit->second.second;
                continue;
            }
        }
        if (progress) {
            progress("training " + std::string(layout == StateLayout::full ? "edgeslice" : "edgeslice-nt") +
                     " agent for RA " + std::to_string(ra.id) + " (" + std::to_string(c.agent.train_steps) +
                     " steps)");
        }
        const auto tag = layout_tag(layout);
        const auto id = static_cast<std::uint64_t>(ra.id);
        auto agent = std::make_shared<DdpgAgent>(c.num_slices(), c.num_resources, layout, c.agent.ddpg,
                                                 derive_seed(c.seed, {1, id, tag}));
        TrainOptions opt;
        opt.period_len = c.period_len;
        opt.rho = c.rho;
        opt.beta = c.beta;
        opt.scales = c.agent.scales;
        opt.initial_queue_max = c.agent.initial_queue_max;
        opt.validation_every = c.agent.validation_every;
        opt.validation_episodes = c.agent.validation_episodes;
        opt.seed = derive_seed(c.seed, {2, id, tag});
        const auto sampler = uniform_coordination(c.num_slices(), c.agent.coordination_low, c.agent.coordination_high);
        TrainResult curve = train_offline(*agent, layout, env.single_ra(j), sampler, c.agent.train_steps, opt);
        if (cache) cache->emplace(key, std::pair{agent, curve});
        out.per_ra[static_cast<std::size_t>(j)] = std::move(agent);
        out.curves[static_cast<std::size_t>(j)] = std::move(curve);
    }
    return out;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, const RASpec& ra) {
    return dir / ("ra_" + std::to_string(ra.id) + ".agent");
}

}  // namespace

TrainedAgents train_agents(const ExperimentConfig& config, StateLayout layout, const ProgressFn& progress) {
    return train_agents_cached(config, layout, progress, nullptr);
}

void save_agents(const TrainedAgents& agents, const ExperimentConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (int j = 0; j < config.num_ras(); ++j) {
        const auto path = checkpoint_path(dir, config.ras[static_cast<std::size_t>(j)]);
        std::ofstream out(path);
        if (!out) throw ConfigError("cannot write " + path.string());
        agents.per_ra.at(static_cast<std::size_t>(j))->save(out);
    }
}

TrainedAgents load_agents(const ExperimentConfig& config, StateLayout layout, const std::filesystem::path& dir) {
    TrainedAgents out;
    out.layout = layout;
    for (int j = 0; j < config.num_ras(); ++j) {
        const auto& ra = config.ras[static_cast<std::size_t>(j)];
        const auto path = checkpoint_path(dir, ra);
        std::ifstream in(path);
        if (!in) throw ConfigError("checkpoint not found: " + path.string());
        auto agent = std::make_shared<DdpgAgent>(config.num_slices(), config.num_resources, layout, config.agent.ddpg,
                                                 derive_seed(config.seed, {1, static_cast<std::uint64_t>(ra.id)}));
        agent->load(in);
        out.per_ra.push_back(std::move(agent));
        out.group.push_back(j);
        out.curves.emplace_back();
    }
    return out;
}

void write_learning_curve(const TrainedAgents& agents, const ExperimentConfig& config, std::ostream& out) {
    out << "# edgeslice learning-curve v1\n";
    out << "ra,episode,reward\n";
    for (int j = 0; j < config.num_ras(); ++j) {
        const int owner = agents.group.at(static_cast<std::size_t>(j));
        const TrainResult& result = agents.curves.at(static_cast<std::size_t>(owner));
        const auto& curve = result.episode_rewards;
        if (result.best_validation) {
            out << "# ra " << config.ras[static_cast<std::size_t>(j)].id << " kept policy from step " << result.best_step
                << " (validation " << text_io::format(*result.best_validation) << ")\n";
        }
        for (std::size_t e = 0; e < curve.size(); ++e) {
            out << config.ras[static_cast<std::size_t>(j)].id << ',' << e << ',' << text_io::format(curve[e]) << '\n';
        }
    }
}

std::vector<std::unique_ptr<Policy>> make_policies(const ExperimentConfig& c, PolicyKind kind,
                                                   const TrainedAgents* agents) {
    std::vector<std::unique_ptr<Policy>> out;
    for (int j = 0; j < c.num_ras(); ++j) {
        const auto& ra = c.ras[static_cast<std::size_t>(j)];
        switch (kind) {
            case PolicyKind::taro:
                out.push_back(std::make_unique<TaroPolicy>());
                break;
            case PolicyKind::oracle: {
                Vector rates(c.num_slices());
                for (int i = 0; i < c.num_slices(); ++i) {
                    rates(i) = mean_rate(c.traffic[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
                }
                out.push_back(std::make_unique<OraclePolicy>(c.slices, ra, rates, c.period_len, c.rho, c.oracle));
                break;
            }
            case PolicyKind::edgeslice:
            case PolicyKind::edgeslice_nt: {
                if (!agents || agents->per_ra.size() != c.ras.size()) {
                    throw ConfigError("policy " + to_string(kind) + " needs one trained agent per RA");
                }
                if (agents->layout != layout_for(kind)) {
                    throw ConfigError("trained agents do not match policy " + to_string(kind));
                }
                out.push_back(std::make_unique<AgentPolicy>(agents->per_ra[static_cast<std::size_t>(j)], c.agent.scales,
                                                          c.agent.coordination_low, c.agent.coordination_high));
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Orchestration loop

std::vector<double> RunResult::system_performance() const {
    std::vector<double> v;
    v.reserve(periods.size());
    for (const auto& p : periods) v.push_back(p.system_performance);
    return v;
}

RunResult run_orchestration(const ExperimentConfig& c, std::vector<std::unique_ptr<Policy>>& policies) {
    const auto started = std::chrono::steady_clock::now();
    const Environment env = make_environment(c);
    const int I = c.num_slices();
    const int J = c.num_ras();
    const int K = c.num_resources;
    if (static_cast<int>(policies.size()) != J) throw ConfigError("run needs exactly one policy per RA");

    RunResult result;
    result.policy = policies.front()->name();
    result.u_min = c.u_min();
    result.slice_cumulative = Vector::Zero(I);
    result.ra_cumulative = Vector::Zero(J);

    PerformanceCoordinator coordinator(c.u_min(), J, c.rho);
    const double tol = c.coordination.tolerance * c.performance_scale();
    EnvState state = env.reset(derive_seed(c.seed, {3}));
    std::vector<Allocation> allocs(static_cast<std::size_t>(J));

    for (int period = 0; period < c.coordination.max_iterations; ++period) {
        if (c.coordination.reset_queues_each_period) state.queues.setZero();
        const CoordinationMsg msg = coordinator.message();
        for (int j = 0; j < J; ++j) policies[static_cast<std::size_t>(j)]->start_period(state.queues.col(j), msg.for_ra(j));

        Matrix perf_sum = Matrix::Zero(I, J);
        std::vector<Matrix> alloc_sum(static_cast<std::size_t>(J), Matrix::Zero(I, K));
        double recorded_total = 0.0;
        for (int t = 0; t < c.period_len; ++t) {
            for (int j = 0; j < J; ++j) {
                auto& a = allocs[static_cast<std::size_t>(j)];
                a = policies[static_cast<std::size_t>(j)]->decide(state.queues.col(j), msg.for_ra(j),
                                                                  c.ras[static_cast<std::size_t>(j)]);
                if (a.num_slices() != I || a.num_resources() != K || !(a.amounts.array() >= 0.0).all()) {
                    throw std::logic_error("policy " + result.policy + " returned an invalid allocation");
                }
                alloc_sum[static_cast<std::size_t>(j)] += a.amounts;
            }
            const long interval = state.interval;
            StepResult step = env.step(state, allocs);
            perf_sum += step.perf.values;
            for (int j = 0; j < J; ++j) {
                const Matrix f = allocs[static_cast<std::size_t>(j)].fractions(c.ras[static_cast<std::size_t>(j)].capacity);
                for (int i = 0; i < I; ++i) {
                    IntervalRecord r;
                    r.period = period;
                    r.interval = interval;
                    r.slice = c.slices[static_cast<std::size_t>(i)].id;
                    r.ra = c.ras[static_cast<std::size_t>(j)].id;
                    r.arrivals = step.arrivals(i, j);
                    r.departures = step.departures(i, j);
                    r.queue = step.next.queues(i, j);
                    r.performance = step.perf.values(i, j);
                    r.fractions = f.row(i).transpose();
                    recorded_total += r.performance;
                    result.intervals.push_back(std::move(r));
                }
            }
            state = std::move(step.next);
        }

        // The per-period figure must be exactly what the interval records add up to.
        const double total = perf_sum.sum();
        if (std::abs(total - recorded_total) > 1e-9 * std::max(1.0, std::abs(total))) {
            throw std::logic_error("accounting identity violated in period " + std::to_string(period));
        }

        for (int j = 0; j < J; ++j) {
            coordinator.submit(j, perf_sum.col(j), alloc_sum[static_cast<std::size_t>(j)] / c.period_len);
        }
        const Matrix z_before = coordinator.state().z;
        coordinator.update();
        const auto& rec = coordinator.history().back();

        PeriodRecord p;
        p.period = period;
        p.system_performance = recorded_total;
        p.slice_performance = perf_sum.rowwise().sum();
        p.primal_residual = (rec.perf_sum - rec.z).cwiseAbs().maxCoeff();
        p.drift = (rec.z - z_before).cwiseAbs().maxCoeff();
        result.periods.push_back(p);
        result.slice_cumulative += p.slice_performance;
        result.ra_cumulative += perf_sum.colwise().sum().transpose();

        if (coordinator.converged(tol, tol, c.coordination.window)) {
            result.converged = true;
            result.convergence_iteration = period + 1;
            break;
        }
    }

    result.coordination = coordinator.history();
    const std::size_t n = result.periods.size();
    const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(c.coordination.evaluation_window));
    result.final_slice_performance = Vector::Zero(I);
    result.final_ra_performance = Vector::Zero(J);
    for (std::size_t k = n - w; k < n; ++k) {
        result.final_performance += result.periods[k].system_performance / static_cast<double>(w);
        result.final_slice_performance += result.periods[k].slice_performance / static_cast<double>(w);
        const Matrix& s = result.coordination[k].perf_sum;
        result.final_ra_performance += s.colwise().sum().transpose() / static_cast<double>(w);
    }
    result.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

void write_run(const RunResult& r, const ExperimentConfig& c, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name);
        if (!out) throw ConfigError("cannot write " + (dir / name).string());
        return out;
    };
    {
        auto out = open("config.json");
        out << config_to_json(c);
    }
    {
        auto out = open("periods.csv");
        out << "# edgeslice periods v1\n";
        out << "period,system_performance";
        for (const auto& s : c.slices) out << ",slice_" << s.id;
        out << ",primal_residual,drift\n";
        for (const auto& p : r.periods) {
            out << p.period << ',' << text_io::format(p.system_performance);
            for (Eigen::Index i = 0; i < p.slice_performance.size(); ++i) {
                out << ',' << text_io::format(p.slice_performance(i));
            }
            out << ',' << text_io::format(p.primal_residual) << ',' << text_io::format(p.drift) << '\n';
        }
    }
    {
        auto out = open("intervals.csv");
        out << "# edgeslice intervals v1\n";
        out << "period,interval,slice,ra,arrivals,departures,queue,performance";
        for (int k = 1; k <= c.num_resources; ++k) out << ",fraction_" << k;
        out << '\n';
        for (const auto& rec : r.intervals) {
            out << rec.period << ',' << rec.interval << ',' << rec.slice << ',' << rec.ra << ','
                << text_io::format(rec.arrivals) << ',' << text_io::format(rec.departures) << ','
                << text_io::format(rec.queue) << ',' << text_io::format(rec.performance);
            for (Eigen::Index k = 0; k < rec.fractions.size(); ++k) out << ',' << text_io::format(rec.fractions(k));
            out << '\n';
        }
    }
    {
        auto out = open("coordination.csv");
        write_coordination_log(r.coordination, out);
    }
    {
        auto out = open("summary.csv");
        out << "# edgeslice summary v1\n";
        out << "key,value\n";
        out << "policy," << r.policy << '\n';
        out << "periods," << r.periods.size() << '\n';
        out << "converged," << (r.converged ? 1 : 0) << '\n';
        out << "convergence_iteration," << r.convergence_iteration << '\n';
        out << "final_performance," << text_io::format(r.final_performance) << '\n';
        for (Eigen::Index i = 0; i < r.slice_cumulative.size(); ++i) {
            out << "slice_" << c.slices[static_cast<std::size_t>(i)].id << "_cumulative,"
                << text_io::format(r.slice_cumulative(i)) << '\n';
        }
        for (Eigen::Index j = 0; j < r.ra_cumulative.size(); ++j) {
            out << "ra_" << c.ras[static_cast<std::size_t>(j)].id << "_cumulative,"
                << text_io::format(r.ra_cumulative(j)) << '\n';
        }
    }
}

void write_report(const std::filesystem::path& run_dir, std::ostream& out) {
    const auto path = run_dir / "intervals.csv";
    std::ifstream in(path);
    if (!in) throw ConfigError("not a run directory (missing intervals.csv): " + run_dir.string());
    std::string line;
    long lineno = 0;
    bool header = false;
    std::map<long, double> system;
    std::map<long, std::map<int, double>> per_slice;
    std::set<int> slices;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line.rfind("period,interval,slice,ra,arrivals,departures,queue,performance", 0) != 0) {
                throw ConfigError(path.string() + ": unexpected header");
            }
            header = true;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 8) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": too few fields");
        const std::string where = path.string() + ":" + std::to_string(lineno);
        const long period = std::lround(text_io::parse_double(cells[0], where));
        const int slice = static_cast<int>(std::lround(text_io::parse_double(cells[2], where)));
        const double perf = text_io::parse_double(cells[7], where);
        system[period] += perf;
        per_slice[period][slice] += perf;
        slices.insert(slice);
    }
    if (!header) throw ConfigError(path.string() + ": empty");

    out << "# edgeslice report v1\n";
    out << "period,system_performance,cumulative_performance";
    for (int s : slices) out << ",slice_" << s;
    out << '\n';
    double cumulative = 0.0;
    for (const auto& [period, total] : system) {
        cumulative += total;
        out << period << ',' << text_io::format(total) << ',' << text_io::format(cumulative);
        for (int s : slices) out << ',' << text_io::format(per_slice[period][s]);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Sweeps

ExperimentConfig resize_config(const ExperimentConfig& base, int num_slices, int num_ras) {
    if (num_slices < 1 || num_ras < 1) throw ConfigError("sweep sizes must be >= 1");
    ExperimentConfig c = base;
    c.slices.clear();
    c.ras.clear();
    c.traffic.assign(static_cast<std::size_t>(num_slices), {});
    for (int i = 0; i < num_slices; ++i) {
        SliceSpec s = base.slices[static_cast<std::size_t>(i % base.num_slices())];
        s.id = i;
        // every RA brings its own traffic, so the slice SLA grows with the RA count
        s.u_min *= static_cast<double>(num_ras) / base.num_ras();
        c.slices.push_back(std::move(s));
    }
    for (int j = 0; j < num_ras; ++j) {
        RASpec r = base.ras[static_cast<std::size_t>(j % base.num_ras())];
        r.id = j;
        c.ras.push_back(std::move(r));
    }
    for (int i = 0; i < num_slices; ++i) {
        for (int j = 0; j < num_ras; ++j) {
            c.traffic[static_cast<std::size_t>(i)].push_back(
                base.traffic[static_cast<std::size_t>(i % base.num_slices())][static_cast<std::size_t>(j % base.num_ras())]);
        }
    }
    validate(c);
    return c;
}

std::vector<SweepRow> scalability_sweep(const ExperimentConfig& base, const SweepRequest& req,
                                        const ProgressFn& progress) {
    validate(base);
    const std::vector<int> slice_counts = req.slice_counts.empty() ? std::vector<int>{base.num_slices()} : req.slice_counts;
    const std::vector<int> ra_counts = req.ra_counts.empty() ? std::vector<int>{base.num_ras()} : req.ra_counts;
    const std::vector<double> alphas = req.alphas.empty() ? std::vector<double>{0.0} : req.alphas;
    const std::vector<PolicyKind> policies = req.policies.empty() ? std::vector<PolicyKind>{base.policy} : req.policies;

    AgentCache cache;
    std::vector<SweepRow> rows;
    for (PolicyKind kind : policies) {
        for (int I : slice_counts) {
            for (int J : ra_counts) {
                for (double alpha : alphas) {
                    ExperimentConfig c = resize_config(base, I, J);
                    if (alpha > 0.0) {
                        for (auto& s : c.slices) s.alpha = alpha;
                    }
                    c.policy = kind;
                    TrainedAgents agents;
                    if (is_learned(kind)) agents = train_agents_cached(c, layout_for(kind), progress, &cache);
                    auto pol = make_policies(c, kind, is_learned(kind) ? &agents : nullptr);
                    const RunResult r = run_orchestration(c, pol);
                    SweepRow row;
                    row.policy = to_string(kind);
                    row.num_slices = I;
                    row.num_ras = J;
                    row.alpha = alpha;
                    row.system_performance = r.final_performance;
                    row.per_ra = r.final_performance / J;
                    row.per_slice = r.final_performance / I;
                    row.converged = r.converged;
                    rows.push_back(row);
                    if (progress) {
                        progress(row.policy + " I=" + std::to_string(I) + " J=" + std::to_string(J) +
                                 " system=" + text_io::format(row.system_performance));
                    }
                }
            }
        }
    }
    return rows;
}

void write_sweep(const std::vector<SweepRow>& rows, std::ostream& out) {
    out << "# edgeslice sweep v1\n";
    out << "policy,num_slices,num_ras,alpha,system_performance,per_ra,per_slice,converged\n";
    for (const auto& r : rows) {
        out << r.policy << ',' << r.num_slices << ',' << r.num_ras << ',' << text_io::format(r.alpha) << ','
            << text_io::format(r.system_performance) << ',' << text_io::format(r.per_ra) << ','
            << text_io::format(r.per_slice) << ',' << (r.converged ? 1 : 0) << '\n';
    }
}

}  // namespace edgeslice
