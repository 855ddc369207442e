// screenkit command line: solve, path, bench, identify, svm.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "screenkit.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace screenkit;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNotConverged = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataArgs {
    std::string path;
    std::string format;
    std::string target = "y";
    std::size_t n = 50;
    std::size_t p = 200;
    std::size_t k_true = 10;
    double snr = 3.0;
    std::uint64_t seed = 0;
};

struct ModelArgs {
    std::string penalty = "l1";
    double alpha = 0.5;
    std::size_t group_size = 5;
    double lo = -1.0;
    double hi = 1.0;
    double lambda_ratio = 0.1;
};

struct RunArgs {
    double eps = 1e-6;
    std::string rule = "dynamic_gap";
    std::size_t max_epochs = 20000;
    std::size_t screen_every = 10;
    std::string out = ".";
};

void add_data_options(CLI::App& app, DataArgs& d)
{
    app.add_option("--data", d.path, "libsvm or CSV file; synthetic data when omitted");
    app.add_option("--format", d.format, "libsvm | csv (default: from extension)")
        ->check(CLI::IsMember({"libsvm", "csv"}));
    app.add_option("--target", d.target, "response column of a CSV file");
    app.add_option("--n", d.n, "synthetic samples");
    app.add_option("--p", d.p, "synthetic features");
    app.add_option("--k-true", d.k_true, "synthetic nonzero coefficients");
    app.add_option("--snr", d.snr, "synthetic signal-to-noise ratio");
    app.add_option("--seed", d.seed, "synthetic seed");
}

void add_model_options(CLI::App& app, ModelArgs& m)
{
    app.add_option("--penalty", m.penalty, "l1 | enet | group | nonneg | box")
        ->check(CLI::IsMember({"l1", "enet", "group", "nonneg", "box"}));
    app.add_option("--alpha", m.alpha, "elastic-net ridge weight");
    app.add_option("--group-size", m.group_size, "contiguous group size for --penalty group");
    app.add_option("--lo", m.lo, "box lower bound");
    app.add_option("--hi", m.hi, "box upper bound");
    app.add_option("--lambda-ratio", m.lambda_ratio, "lambda / lambda_max");
}

void add_run_options(CLI::App& app, RunArgs& r, bool single_rule)
{
    app.add_option("--eps", r.eps, "stop once gap <= eps * ||y||^2");
    if (single_rule)
        app.add_option("--rule", r.rule, "none | static | dynamic_gap | strong_then_safe | aggressive_then_safe | working_set");
    app.add_option("--max-epochs", r.max_epochs, "epoch budget");
    app.add_option("--screen-every", r.screen_every, "epochs between gap evaluations");
    app.add_option("--out", r.out, "output directory");
}

Dataset load_data(const DataArgs& d, bool nonneg)
{
    if (d.path.empty()) {
        SyntheticSpec spec{d.n, d.p, d.k_true, d.snr, d.seed, nonneg};
        try {
            return make_synthetic(spec);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    std::string format = d.format;
    if (format.empty())
        format = fs::path(d.path).extension() == ".csv" ? "csv" : "libsvm";
    return format == "csv" ? load_csv(d.path, d.target) : load_libsvm(d.path);
}

Rule rule_arg(const std::string& s)
{
    const auto r = parse_rule(s);
    if (!r)
        throw UsageError("unknown rule '" + s + "'");
    return *r;
}

SolveOptions solve_options(const RunArgs& r, Rule rule)
{
    SolveOptions o;
    o.tol_eps = r.eps;
    o.rule = rule;
    o.max_epochs = r.max_epochs;
    o.screen_every = r.screen_every;
    try {
        o.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return o;
}

/// Dataset plus the problem built on it; owns everything Problem points to.
struct Model {
    Dataset ds;
    GroupStructure groups;
    QuadraticLoss loss;
    Problem base;
    double lmax = 0.0;
    double ratio = 0.0;

    Model(Dataset data, const ModelArgs& m)
        : ds(std::move(data)), groups(make_groups(ds, m)), loss(ds.y), base(ds.X, groups, loss, make_penalty(m))
    {
        if (base.penalty().has_lambda()) {
            if (!(m.lambda_ratio > 0.0))
                throw UsageError("--lambda-ratio must be positive");
            lmax = lambda_max(base);
            ratio = m.lambda_ratio;
            if (!(lmax > 0.0))
                throw DataError("lambda_max is zero: the response is orthogonal to every column");
        }
    }

    Problem at_ratio(double r) const { return base.penalty().has_lambda() ? base.with_lambda(lmax * r) : base; }
    Problem problem() const { return at_ratio(ratio); }

    static GroupStructure make_groups(const Dataset& ds, const ModelArgs& m)
    {
        if (m.penalty == "group")
            return GroupStructure::contiguous(ds.X, m.group_size);
        return GroupStructure::singletons(ds.X);
    }

    static Penalty make_penalty(const ModelArgs& m)
    {
        try {
            if (m.penalty == "l1")
                return Penalty::l1(1.0);
            if (m.penalty == "enet")
                return Penalty::elastic_net(1.0, m.alpha);
            if (m.penalty == "group")
                return Penalty::group_l2(1.0);
            if (m.penalty == "nonneg")
                return Penalty::non_negative();
            return Penalty::box(m.lo, m.hi);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
};

json nullable(const std::optional<double>& v)
{
    return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

json nullable(const std::optional<long>& v) { return v ? json(*v) : json(nullptr); }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

fs::path prepare_out(const std::string& dir)
{
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec)
        throw DataError("cannot create output directory " + dir + ": " + ec.message());
    return p;
}

struct Timed {
    SolveOutput out;
    double seconds = 0.0;
};

Timed timed_solve(const Problem& pb, const SolveOptions& opts)
{
    const auto t0 = std::chrono::steady_clock::now();
    SolveOutput out = solve(pb, opts);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(out), s};
}

json summary(const Model& model, Rule rule, double eps, const Timed& t, const Problem& pb)
{
    const Solution& sol = t.out.solution;
    return json{{"rule", std::string(to_string(rule))},
                {"eps", eps},
                {"lambda_ratio", model.base.penalty().has_lambda() ? json(model.ratio) : json(nullptr)},
                {"epochs", sol.epochs_used},
                {"seconds", t.seconds},
                {"normalized_time", rule == Rule::DynamicGap ? json(1.0) : json(nullptr)},
                {"n_screened_final", sol.state.n_screened()},
                {"beta_hash", beta_hash(sol.beta)},
                {"lambda", pb.penalty().has_lambda() ? json(pb.penalty().lambda) : json(nullptr)},
                {"penalty", std::string(to_string(pb.penalty().kind))},
                {"final_gap", finite_or_null(sol.final_gap)},
                {"converged", sol.converged}};
}

int cmd_solve(const DataArgs& d, const ModelArgs& m, const RunArgs& r)
{
    const Rule rule = rule_arg(r.rule);
    const SolveOptions opts = solve_options(r, rule);
    const Model model(load_data(d, m.penalty == "nonneg"), m);
    const fs::path dir = prepare_out(r.out);
    const Problem pb = model.problem();
    const Timed t = timed_solve(pb, opts);
    write_trace_csv(t.out.trace, (dir / "trace.csv").string());
    write_json(dir / "summary.json", summary(model, rule, r.eps, t, pb));
    std::cout << "rule=" << to_string(rule) << " epochs=" << t.out.solution.epochs_used
              << " gap=" << t.out.solution.final_gap << " screened=" << t.out.solution.state.n_screened()
              << " beta_hash=" << beta_hash(t.out.solution.beta) << '\n';
    return t.out.solution.converged ? kOk : kNotConverged;
}

int cmd_path(const DataArgs& d, const ModelArgs& m, const RunArgs& r, std::size_t grid_size)
{
    const Rule rule = rule_arg(r.rule);
    const SolveOptions opts = solve_options(r, rule);
    const Model model(load_data(d, m.penalty == "nonneg"), m);
    if (!model.base.penalty().has_lambda())
        throw UsageError("path needs a penalty with a weight (l1, enet, group)");
    if (!(model.ratio < 1.0))
        throw UsageError("--lambda-ratio must be below 1 for a path");
    PathSpec spec;
    try {
        spec = lambda_grid(model.lmax, model.ratio, grid_size);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const fs::path dir = prepare_out(r.out);
    const auto t0 = std::chrono::steady_clock::now();
    const PathResult res = solve_path(model.base, spec, opts);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json points = json::array();
    bool ok = true;
    for (std::size_t t = 0; t < res.points.size(); ++t) {
        const PathPoint& pt = res.points[t];
        json j{{"index", t}, {"lambda", pt.lambda}, {"lambda_ratio", pt.lambda / model.lmax},
               {"n_sequential", pt.n_sequential}};
        if (pt.result) {
            const Solution& sol = pt.result->solution;
            j["epochs"] = sol.epochs_used;
            j["converged"] = sol.converged;
            j["final_gap"] = finite_or_null(sol.final_gap);
            j["n_screened_final"] = sol.state.n_screened();
            j["beta_hash"] = beta_hash(sol.beta);
            std::ostringstream name;
            name << "trace_" << t << ".csv";
            write_trace_csv(pt.result->trace, (dir / name.str()).string());
            ok = ok && sol.converged;
        } else {
            j["error"] = pt.error;
            ok = false;
        }
        points.push_back(std::move(j));
    }
    write_json(dir / "path.json",
               json{{"rule", std::string(to_string(rule))}, {"eps", r.eps}, {"lambda_max", model.lmax},
                    {"seconds", seconds}, {"points", std::move(points)}});
    std::cout << "path points=" << res.points.size() << " seconds=" << seconds << '\n';
    return ok ? kOk : kNotConverged;
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

std::size_t thread_cap()
{
    std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SCREENKIT_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1)
            throw UsageError("SCREENKIT_THREADS must be a positive integer");
        cap = static_cast<std::size_t>(v);
    }
    return cap;
}

int cmd_bench(const DataArgs& d, const ModelArgs& m, const RunArgs& r, const std::string& rules_arg,
              const std::string& eps_arg)
{
    std::vector<Rule> rules;
    for (const auto& s : split_list(rules_arg))
        rules.push_back(rule_arg(s));
    std::vector<double> eps_list;
    for (const auto& s : split_list(eps_arg)) {
        double v = 0.0;
        if (!detail::parse_double(s, v) || !(v > 0.0))
            throw UsageError("bad --eps-list entry '" + s + "'");
        eps_list.push_back(v);
    }
    if (rules.empty() || eps_list.empty())
        throw UsageError("bench needs at least one rule and one eps");
    for (Rule rule : rules)
        for (double e : eps_list) {
            RunArgs cell = r;
            cell.eps = e;
            solve_options(cell, rule);
        }

    const Model model(load_data(d, m.penalty == "nonneg"), m);
    const fs::path dir = prepare_out(r.out);
    const Problem pb = model.problem();

    struct Cell {
        Rule rule;
        double eps;
        Timed result;
    };
    std::vector<Cell> cells;
    for (double e : eps_list)
        for (Rule rule : rules)
            cells.push_back({rule, e, {}});

    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                RunArgs cell = r;
                cell.eps = cells[i].eps;
                cells[i].result = timed_solve(pb, solve_options(cell, cells[i].rule));
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::min(thread_cap(), cells.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& th : pool)
        th.join();
    if (failure)
        std::rethrow_exception(failure);

    json rows = json::array();
    bool ok = true;
    for (const Cell& c : cells) {
        json row = summary(model, c.rule, c.eps, c.result, pb);
        row["normalized_time"] = nullptr;
        for (const Cell& base : cells)
            if (base.rule == Rule::DynamicGap && base.eps == c.eps && base.result.seconds > 0.0)
                row["normalized_time"] = c.result.seconds / base.result.seconds;
        std::ostringstream name;
        name << "trace_" << to_string(c.rule) << "_eps" << c.eps << ".csv";
        write_trace_csv(c.result.out.trace, (dir / name.str()).string());
        ok = ok && c.result.out.solution.converged;
        std::cout << to_string(c.rule) << " eps=" << c.eps << " epochs=" << c.result.out.solution.epochs_used
                  << " seconds=" << c.result.seconds << " beta_hash=" << row["beta_hash"].get<std::string>() << '\n';
        rows.push_back(std::move(row));
    }
    write_json(dir / "bench.json", rows);
    return ok ? kOk : kNotConverged;
}

int cmd_identify(const DataArgs& d, const ModelArgs& m, RunArgs r)
{
    const SolveOptions opts = solve_options(r, Rule::DynamicGap);
    const Model model(load_data(d, m.penalty == "nonneg"), m);
    const fs::path dir = prepare_out(r.out);
    const Problem pb = model.problem();
    const IdentificationReport rep = identify(pb, opts, spectral_norm(pb.X()).value);
    json active = json::array();
    for (std::size_t g = 0; g < rep.oracle_active.size(); ++g)
        if (rep.oracle_active[g])
            active.push_back(g);
    const json j{{"penalty", std::string(to_string(pb.penalty().kind))},
                 {"lambda_ratio", pb.penalty().has_lambda() ? json(model.ratio) : json(nullptr)},
                 {"eps", r.eps},
                 {"oracle_active", std::move(active)},
                 {"active_size", rep.active_size()},
                 {"delta_z", finite_or_null(rep.delta_z)},
                 {"delta_z_infinite", std::isinf(rep.delta_z)},
                 {"k0_measured", nullable(rep.k0_measured)},
                 {"k0_radius", nullable(rep.k0_radius)},
                 {"k0_bound_linear", nullable(rep.k0_bound_linear)},
                 {"k0_bound_sublinear", nullable(rep.k0_bound_sublinear)},
                 {"kappa_hat", nullable(rep.kappa_hat)},
                 {"reference_gap", finite_or_null(rep.reference_gap)},
                 {"epochs", rep.epochs}};
    write_json(dir / "identify.json", j);
    std::cout << "active=" << rep.active_size() << " delta_z=" << rep.delta_z << " k0_measured="
              << (rep.k0_measured ? std::to_string(*rep.k0_measured) : "none") << " k0_radius="
              << (rep.k0_radius ? std::to_string(*rep.k0_radius) : "none") << '\n';
    return kOk;
}

int cmd_svm(DataArgs d, const RunArgs& r, double lambda, double separation)
{
    const Rule rule = rule_arg(r.rule);
    const SolveOptions opts = solve_options(r, rule);
    if (!(lambda > 0.0))
        throw UsageError("--lambda must be positive");
    Dataset ds;
    if (d.path.empty()) {
        if (d.n == 0 || d.p == 0)
            throw UsageError("synthetic data needs n, p >= 1");
        ds = make_two_class(d.n, d.p, separation, d.seed);
    } else {
        ds = load_data(d, false);
    }
    for (Eigen::Index i = 0; i < ds.y.size(); ++i)
        if (ds.y[i] != 1.0 && ds.y[i] != -1.0)
            throw DataError("SVM labels must be +1 or -1");
    const fs::path dir = prepare_out(r.out);
    const auto t0 = std::chrono::steady_clock::now();
    const SvmOutput out = solve_svm(ds.X, ds.y, lambda, opts);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const SvmSolution& sol = out.solution;
    std::size_t at_zero = 0;
    std::size_t at_one = 0;
    for (std::size_t i = 0; i < sol.samples.size(); ++i)
        if (!sol.samples.is_active(i))
            ++(sol.samples.fixed_value(i) == 0.0 ? at_zero : at_one);
    write_trace_csv(out.trace, (dir / "trace.csv").string());
    write_json(dir / "summary.json",
               json{{"rule", std::string(to_string(rule))}, {"eps", r.eps}, {"lambda", lambda},
                    {"epochs", sol.epochs_used}, {"seconds", seconds}, {"final_gap", finite_or_null(sol.final_gap)},
                    {"converged", sol.converged}, {"n_screened_final", sol.samples.n_screened()},
                    {"n_screened_margin", at_zero}, {"n_screened_violating", at_one},
                    {"beta_hash", beta_hash(sol.beta)}});
    std::cout << "svm epochs=" << sol.epochs_used << " gap=" << sol.final_gap
              << " screened=" << sol.samples.n_screened() << '\n';
    return sol.converged ? kOk : kNotConverged;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Safe screening solvers for sparse regression"};
    app.require_subcommand(1);

    DataArgs data;
    ModelArgs model;
    RunArgs run;
    std::size_t grid_size = 10;
    std::string rules = "none,static,dynamic_gap,strong_then_safe,aggressive_then_safe,working_set";
    std::string eps_list = "1e-4,1e-6,1e-8";
    double svm_lambda = 1.0;
    double separation = 2.0;

    auto* solve_cmd = app.add_subcommand("solve", "solve at one lambda");
    add_data_options(*solve_cmd, data);
    add_model_options(*solve_cmd, model);
    add_run_options(*solve_cmd, run, true);

    auto* path_cmd = app.add_subcommand("path", "geometric path from lambda_max down to lambda_max * ratio");
    add_data_options(*path_cmd, data);
    add_model_options(*path_cmd, model);
    add_run_options(*path_cmd, run, true);
    path_cmd->add_option("--grid-size", grid_size, "number of lambda values");

    auto* bench_cmd = app.add_subcommand("bench", "rules x eps grid with times normalized to dynamic_gap");
    add_data_options(*bench_cmd, data);
    add_model_options(*bench_cmd, model);
    add_run_options(*bench_cmd, run, false);
    bench_cmd->add_option("--rules", rules, "comma-separated rules");
    bench_cmd->add_option("--eps-list", eps_list, "comma-separated tolerances");

    auto* identify_cmd = app.add_subcommand("identify", "oracle active set and identification epochs");
    add_data_options(*identify_cmd, data);
    add_model_options(*identify_cmd, model);
    add_run_options(*identify_cmd, run, false);

    auto* svm_cmd = app.add_subcommand("svm", "hinge-loss SVM with sample screening");
    add_data_options(*svm_cmd, data);
    add_run_options(*svm_cmd, run, true);
    svm_cmd->add_option("--lambda", svm_lambda, "ridge weight");
    svm_cmd->add_option("--separation", separation, "class separation of synthetic data");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*solve_cmd)
            return cmd_solve(data, model, run);
        if (*path_cmd)
            return cmd_path(data, model, run, grid_size);
        if (*bench_cmd)
            return cmd_bench(data, model, run, rules, eps_list);
        if (*identify_cmd)
            return cmd_identify(data, model, run);
        if (*svm_cmd)
            return cmd_svm(data, run, svm_lambda, separation);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}
