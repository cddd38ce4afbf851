#include "subcurv/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string_view>
#include <thread>

#include "subcurv/canonical.hpp"
#include "subcurv/connection.hpp"
#include "subcurv/lq.hpp"
#include "subcurv/twist.hpp"
#include "subcurv/zoo.hpp"

namespace subcurv {

// ---------------------------------------------------------------------------
// JsonValue

JsonValue& JsonValue::push_back(JsonValue v) {
    if (kind_ != Kind::Array)
        throw Error(ErrorKind::Invalid, "push_back on a non-array value");
    array_.push_back(std::move(v));
    return array_.back();
}

const std::vector<JsonValue>& JsonValue::items() const {
    if (kind_ != Kind::Array)
        throw Error(ErrorKind::Invalid, "items() on a non-array value");
    return array_;
}

std::size_t JsonValue::size() const {
    if (kind_ == Kind::Array) return array_.size();
    if (kind_ == Kind::Object) return object_.size();
    throw Error(ErrorKind::Invalid, "size() on a scalar value");
}

JsonValue& JsonValue::set(const std::string& key, JsonValue v) {
    if (kind_ != Kind::Object)
        throw Error(ErrorKind::Invalid, "set on a non-object value");
    for (auto& [k, old] : object_)
        if (k == key) {
            old = std::move(v);
            return old;
        }
    object_.emplace_back(key, std::move(v));
    return object_.back().second;
}

const JsonValue* JsonValue::find(const std::string& key) const {
    if (kind_ != Kind::Object)
        throw Error(ErrorKind::Invalid, "find on a non-object value");
    for (const auto& [k, v] : object_)
        if (k == key) return &v;
    return nullptr;
}

const JsonValue& JsonValue::at(const std::string& key) const {
    const JsonValue* v = find(key);
    if (!v) throw Error(ErrorKind::Invalid, "missing report field: " + key);
    return *v;
}

const std::vector<std::pair<std::string, JsonValue>>& JsonValue::members()
    const {
    if (kind_ != Kind::Object)
        throw Error(ErrorKind::Invalid, "members() on a non-object value");
    return object_;
}

bool JsonValue::as_bool() const {
    if (kind_ != Kind::Bool)
        throw Error(ErrorKind::Invalid, "value is not a boolean");
    return bool_;
}

std::int64_t JsonValue::as_int() const {
    if (kind_ != Kind::Int)
        throw Error(ErrorKind::Invalid, "value is not an integer");
    return int_;
}

double JsonValue::as_double() const {
    if (kind_ == Kind::Int) return static_cast<double>(int_);
    if (kind_ != Kind::Double)
        throw Error(ErrorKind::Invalid, "value is not a number");
    return double_;
}

const std::string& JsonValue::as_string() const {
    if (kind_ != Kind::String)
        throw Error(ErrorKind::Invalid, "value is not a string");
    return string_;
}

namespace {

void append_escaped(std::string& out, const std::string& s) {
    out += '"';
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += '"';
}

void append_double(std::string& out, double v) {
    if (!std::isfinite(v)) {
        out += "null";
        return;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
    // Keep the numeric type visible so integral doubles stay doubles.
    if (std::string_view(buf).find_first_of(".eEn") == std::string_view::npos)
        out += ".0";
}

}  // namespace

void JsonValue::dump(std::string& out, int indent, int depth) const {
    const std::string pad(indent * (depth + 1), ' ');
    const std::string close_pad(indent * depth, ' ');
    const char* nl = indent > 0 ? "\n" : "";
    switch (kind_) {
        case Kind::Null: out += "null"; break;
        case Kind::Bool: out += bool_ ? "true" : "false"; break;
        case Kind::Int: out += std::to_string(int_); break;
        case Kind::Double: append_double(out, double_); break;
        case Kind::String: append_escaped(out, string_); break;
        case Kind::Array: {
            if (array_.empty()) {
                out += "[]";
                break;
            }
            out += '[';
            out += nl;
            for (std::size_t i = 0; i < array_.size(); ++i) {
                out += pad;
                array_[i].dump(out, indent, depth + 1);
                if (i + 1 < array_.size()) out += ',';
                out += nl;
            }
            out += close_pad;
            out += ']';
            break;
        }
        case Kind::Object: {
            if (object_.empty()) {
                out += "{}";
                break;
            }
            out += '{';
            out += nl;
            for (std::size_t i = 0; i < object_.size(); ++i) {
                out += pad;
                append_escaped(out, object_[i].first);
                out += indent > 0 ? ": " : ":";
                object_[i].second.dump(out, indent, depth + 1);
                if (i + 1 < object_.size()) out += ',';
                out += nl;
            }
            out += close_pad;
            out += '}';
            break;
        }
    }
}

std::string JsonValue::dump(int indent) const {
    std::string out;
    dump(out, indent, 0);
    return out;
}

// ---------------------------------------------------------------------------
// Shared command plumbing.

namespace {

JsonValue vec_json(const Vec& v) {
    JsonValue arr = JsonValue::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

struct ResolvedModel {
    std::shared_ptr<const SubRiemannianModel> model;
    std::optional<ZooEntry> zoo;  // set when the model came from the zoo
};

ResolvedModel resolve_model(const std::string& spec) {
    ResolvedModel out;
    if (spec.find('/') != std::string::npos ||
        (spec.size() > 5 && spec.substr(spec.size() - 5) == ".json")) {
        auto m = std::make_shared<SubRiemannianModel>(load_model_json(spec));
        out.model = m;
        return out;
    }
    out.zoo = zoo_lookup(spec);
    out.model = out.zoo->model;
    return out;
}

Connection make_connection(const ResolvedModel& rm,
                           const std::string& which) {
    if (which == "nice") return Connection::nice(rm.model);
    if (which == "group") return Connection::group(rm.model);
    throw Error(ErrorKind::Invalid,
                "unknown connection '" + which + "' (expected nice|group)");
}

std::string iso_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

JsonValue document_header(const char* command, const ReportOptions& opt) {
    JsonValue doc = JsonValue::object();
    doc.set("schema", kReportSchema);
    doc.set("tool_version", kToolVersion);
    doc.set("command", command);
    doc.set("model", opt.model);
    doc.set("connection", opt.connection);
    JsonValue o = JsonValue::object();
    o.set("samples", opt.samples);
    o.set("seed", static_cast<std::int64_t>(opt.seed));
    o.set("t_max", opt.t_max);
    o.set("tol", opt.tol);
    o.set("vertical_range", opt.vertical_range);
    doc.set("options", std::move(o));
    if (opt.timestamp) doc.set("timestamp", iso_timestamp());
    return doc;
}

// Work-stealing record loop: workers pull indices from a shared counter and
// write into their own slot, so the record order is deterministic.
void parallel_records(int count, const std::function<void(int)>& work) {
    int workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, 8);
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) work(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i; (i = next.fetch_add(1)) < count;) work(i);
        });
    for (auto& t : pool) t.join();
}

// Covector sample at the model center: a deterministic vertical-magnitude
// grid (including zero) under the first horizontal direction, then seeded
// random unit horizontal momenta with vertical momenta in the declared ball.
std::vector<CovectorPoint> center_samples(const SubRiemannianModel& model,
                                          int samples, unsigned seed,
                                          double range) {
    const int n = model.dim, d1 = model.horizontal_rank, m = n - d1;
    const Vec x0 = model.center();
    std::vector<CovectorPoint> out;

    const auto push = [&](const Vec& h_part, const Vec& v_part) {
        Vec H = Vec::Zero(n);
        H.head(d1) = h_part;
        if (m > 0) H.tail(m) = v_part;
        out.push_back({x0, H});
    };

    Vec e0 = Vec::Zero(d1);
    e0(0) = 1.0;
    if (m > 0) {
        Vec v0 = Vec::Zero(m);
        v0(0) = 1.0;
        for (double frac : {0.0, 0.5, 1.0, -0.5, -1.0})
            push(e0, frac * range * v0);
    } else {
        push(e0, Vec());
    }

    std::mt19937 gen(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    while (static_cast<int>(out.size()) < samples) {
        Vec hu(d1);
        do {
            for (int i = 0; i < d1; ++i) hu(i) = gauss(gen);
        } while (hu.norm() < 1e-8);
        hu.normalize();
        Vec vp;
        if (m > 0) {
            vp.resize(m);
            do {
                for (int i = 0; i < m; ++i) vp(i) = gauss(gen);
            } while (vp.norm() < 1e-8);
            vp *= unif(gen) * range / vp.norm();
        }
        push(hu, vp);
    }
    out.resize(samples);
    return out;
}

// Sample for the diagram census: base points spread over the chart (the
// center first, then seeded uniform draws over 70% of the domain box) with
// seeded unit-sphere momenta.
std::vector<CovectorPoint> census_samples(const SubRiemannianModel& model,
                                          int samples, unsigned seed) {
    const int n = model.dim, d1 = model.horizontal_rank, m = n - d1;
    std::vector<CovectorPoint> out;

    Vec H0 = Vec::Zero(n);
    H0(0) = 1.0;
    if (m > 0) H0(d1) = 0.5;
    H0.normalize();
    out.push_back({model.center(), H0});

    std::mt19937 gen(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(-0.7, 0.7);
    while (static_cast<int>(out.size()) < samples) {
        Vec x(n);
        for (int i = 0; i < n; ++i) {
            const auto& [lo, hi] = model.domain[i];
            x(i) = 0.5 * (lo + hi) + 0.5 * (hi - lo) * unif(gen);
        }
        Vec H(n);
        do {
            for (int i = 0; i < n; ++i) H(i) = gauss(gen);
        } while (H.norm() < 1e-8);
        H.normalize();
        out.push_back({x, H});
    }
    out.resize(samples);
    return out;
}

void set_error_fields(JsonValue& rec, const Error& e) {
    rec.set("error", error_kind_name(e.kind()));
    rec.set("message", std::string(e.what()));
}

std::string cell_key(const char* prefix, int a, int b) {
    return std::string(prefix) + "_" + std::to_string(a) + "_" +
           std::to_string(b);
}

double declared_deviation(const ZooEntry& zoo, const RicciReport& rr,
                          const CovectorPoint& p) {
    double worst = 0.0;
    for (const auto& decl : zoo.ricci) {
        const double want = decl.value(p);
        const double got = rr.value(decl.a, decl.b);
        worst = std::max(worst, std::abs(got - want));
    }
    return worst;
}

}  // namespace

// ---------------------------------------------------------------------------
// classify

JsonValue cmd_classify(const ReportOptions& opt) {
    const ResolvedModel rm = resolve_model(opt.model);
    const Connection conn = make_connection(rm, opt.connection);
    const auto sample = census_samples(*rm.model, std::max(opt.samples, 1),
                                       opt.seed);

    std::vector<JsonValue> records(sample.size());
    parallel_records(static_cast<int>(sample.size()), [&](int i) {
        const CovectorPoint& p = sample[i];
        JsonValue rec = JsonValue::object();
        rec.set("index", i);
        rec.set("x", vec_json(p.x));
        rec.set("H", vec_json(p.H));
        try {
            Classification cls = [&] {
                try {
                    return classify(conn, p, 0.05 * opt.t_max, 3, opt.tol);
                } catch (const Error& e) {
                    // Fall back to the single point when the monitoring
                    // window leaves the chart.
                    if (e.kind() != ErrorKind::Domain) throw;
                    return classify(conn, p, 0.0, 1, opt.tol);
                }
            }();
            rec.set("diagram", cls.diagram.to_string());
            rec.set("ample", cls.ample);
            rec.set("equiregular", cls.equiregular);
            if (cls.in_sigma) rec.set("in_sigma", *cls.in_sigma);
            rec.set("uncertain", cls.uncertain);
            rec.set("irregular", cls.irregular);
        } catch (const Error& e) {
            set_error_fields(rec, e);
        }
        records[i] = std::move(rec);
    });

    JsonValue doc = document_header("classify", opt);
    JsonValue arr = JsonValue::array();
    std::map<std::string, int> census;
    int uncertain = 0, in_sigma = 0, with_sigma = 0, failed = 0;
    for (auto& rec : records) {
        if (const JsonValue* d = rec.find("diagram"))
            ++census[d->as_string()];
        else
            ++failed;
        if (const JsonValue* u = rec.find("uncertain"))
            if (u->as_bool()) ++uncertain;
        if (const JsonValue* s = rec.find("in_sigma")) {
            ++with_sigma;
            if (s->as_bool()) ++in_sigma;
        }
        arr.push_back(std::move(rec));
    }
    doc.set("records", std::move(arr));

    JsonValue agg = JsonValue::object();
    JsonValue cls_arr = JsonValue::array();
    for (const auto& [name, count] : census) {
        JsonValue c = JsonValue::object();
        c.set("diagram", name);
        c.set("count", count);
        c.set("fraction", static_cast<double>(count) /
                              static_cast<double>(records.size()));
        cls_arr.push_back(std::move(c));
    }
    agg.set("classes", std::move(cls_arr));
    agg.set("uncertain_count", uncertain);
    agg.set("failed_count", failed);
    if (with_sigma > 0)
        agg.set("sigma_fraction", static_cast<double>(in_sigma) /
                                      static_cast<double>(with_sigma));
    doc.set("aggregate", std::move(agg));
    return doc;
}

// ---------------------------------------------------------------------------
// ricci

JsonValue cmd_ricci(const ReportOptions& opt) {
    const ResolvedModel rm = resolve_model(opt.model);
    const Connection conn = make_connection(rm, opt.connection);
    const auto sample = center_samples(*rm.model, std::max(opt.samples, 1),
                                       opt.seed, opt.vertical_range);

    std::vector<JsonValue> records(sample.size());
    parallel_records(static_cast<int>(sample.size()), [&](int i) {
        const CovectorPoint& p = sample[i];
        JsonValue rec = JsonValue::object();
        rec.set("index", i);
        rec.set("x", vec_json(p.x));
        rec.set("H", vec_json(p.H));
        try {
            const RicciReport rr = ricci(conn, p, opt.tol);
            rec.set("diagram", rr.diagram.to_string());
            for (const auto& e : rr.entries)
                rec.set(cell_key("ric", e.a, e.b), e.value);
            rec.set("completion_residual", rr.completion_residual);
            if (rm.zoo && !rm.zoo->ricci.empty())
                rec.set("declared_deviation",
                        declared_deviation(*rm.zoo, rr, p));
        } catch (const Error& e) {
            set_error_fields(rec, e);
        }
        records[i] = std::move(rec);
    });

    JsonValue doc = document_header("ricci", opt);
    JsonValue arr = JsonValue::array();
    std::map<std::string, std::pair<double, double>> cells;  // min, max
    double worst_residual = 0.0, worst_declared = 0.0;
    int failed = 0;
    for (auto& rec : records) {
        if (rec.find("error")) {
            ++failed;
        } else {
            for (const auto& [key, value] : rec.members()) {
                if (key.rfind("ric_", 0) != 0) continue;
                const double v = value.as_double();
                auto it = cells.find(key);
                if (it == cells.end())
                    cells.emplace(key, std::make_pair(v, v));
                else {
                    it->second.first = std::min(it->second.first, v);
                    it->second.second = std::max(it->second.second, v);
                }
            }
            worst_residual = std::max(
                worst_residual, rec.at("completion_residual").as_double());
            if (const JsonValue* d = rec.find("declared_deviation"))
                worst_declared = std::max(worst_declared, d->as_double());
        }
        arr.push_back(std::move(rec));
    }
    doc.set("records", std::move(arr));

    JsonValue agg = JsonValue::object();
    JsonValue cell_arr = JsonValue::array();
    for (const auto& [key, mm] : cells) {
        JsonValue c = JsonValue::object();
        c.set("cell", key);
        c.set("min", mm.first);
        c.set("max", mm.second);
        cell_arr.push_back(std::move(c));
    }
    agg.set("cells", std::move(cell_arr));
    agg.set("failed_count", failed);
    agg.set("worst_completion_residual", worst_residual);
    if (rm.zoo && !rm.zoo->ricci.empty())
        agg.set("worst_declared_deviation", worst_declared);
    doc.set("aggregate", std::move(agg));
    return doc;
}

// ---------------------------------------------------------------------------
// bonnet-myers

JsonValue cmd_bonnet_myers(const ReportOptions& opt) {
    const ResolvedModel rm = resolve_model(opt.model);
    const Connection conn = make_connection(rm, opt.connection);
    CovectorSampleSpec spec;
    spec.samples = opt.samples;
    spec.seed = opt.seed;
    spec.vertical_range = opt.vertical_range;
    const DiameterReport rep = diameter_bound(conn, spec, opt.tol);

    JsonValue doc = document_header("bonnet-myers", opt);
    JsonValue arr = JsonValue::array();
    for (const auto& route : rep.routes) {
        JsonValue rec = JsonValue::object();
        rec.set("route", route.name);
        rec.set("applicable", route.applicable);
        rec.set("detail", route.detail);
        JsonValue prof = JsonValue::array();
        for (double k : route.profile) prof.push_back(k);
        rec.set("profile", std::move(prof));
        rec.set("bound", route.bound ? JsonValue(*route.bound) : JsonValue());
        arr.push_back(std::move(rec));
    }
    doc.set("records", std::move(arr));

    JsonValue agg = JsonValue::object();
    agg.set("diagram", rep.diagram.to_string());
    agg.set("sample_count", rep.sample_count);
    agg.set("bound", rep.bound ? JsonValue(*rep.bound) : JsonValue());
    doc.set("aggregate", std::move(agg));
    return doc;
}

// ---------------------------------------------------------------------------
// lq

JsonValue cmd_lq(const ReportOptions& opt) {
    const YoungDiagram diagram(opt.lq_columns);
    const LQProblem lq = LQProblem::from_young(diagram, opt.lq_potential);
    const auto tc = conjugate_time(lq, opt.t_max, 1e-10);

    JsonValue doc = document_header("lq", opt);
    JsonValue rec = JsonValue::object();
    JsonValue cols = JsonValue::array();
    for (int c : diagram.columns()) cols.push_back(c);
    rec.set("columns", std::move(cols));
    JsonValue rows = JsonValue::array();
    for (int r : diagram.row_lengths()) rows.push_back(r);
    rec.set("row_lengths", std::move(rows));
    JsonValue pot = JsonValue::array();
    for (double k : opt.lq_potential) pot.push_back(k);
    rec.set("potential", std::move(pot));
    rec.set("dim", lq.dim());
    rec.set("t_max", opt.t_max);
    rec.set("conjugate_time", tc ? JsonValue(*tc) : JsonValue());

    if (diagram.num_rows() == 1) {
        const auto bm = bm_polynomial_check(opt.lq_potential);
        rec.set("polynomial_bounded", bm.bounded);
        JsonValue roots = JsonValue::array();
        for (const auto& y : bm.roots) {
            JsonValue pair = JsonValue::array();
            pair.push_back(y.real());
            pair.push_back(y.imag());
            roots.push_back(std::move(pair));
        }
        rec.set("polynomial_roots", std::move(roots));
    }

    JsonValue arr = JsonValue::array();
    arr.push_back(std::move(rec));
    doc.set("records", std::move(arr));
    JsonValue agg = JsonValue::object();
    agg.set("conjugate_time", tc ? JsonValue(*tc) : JsonValue());
    doc.set("aggregate", std::move(agg));
    return doc;
}

// ---------------------------------------------------------------------------
// validate

JsonValue cmd_validate(const ReportOptions& opt) {
    const ResolvedModel rm = resolve_model(opt.model);
    const Connection conn = make_connection(rm, opt.connection);
    const auto sample = center_samples(*rm.model, std::max(opt.samples, 1),
                                       opt.seed, opt.vertical_range);

    std::vector<JsonValue> records(sample.size());
    parallel_records(static_cast<int>(sample.size()), [&](int i) {
        const CovectorPoint& p = sample[i];
        JsonValue rec = JsonValue::object();
        rec.set("index", i);
        rec.set("x", vec_json(p.x));
        rec.set("H", vec_json(p.H));
        try {
            const auto checks = validate_normalization(conn, p, opt.tol);
            double worst = 0.0;
            for (const auto& c : checks) {
                const std::string key =
                    "condition_" + std::to_string(c.condition);
                rec.set(key + "_residual", c.residual);
                rec.set(key + "_vacuous", c.vacuous);
                if (!c.vacuous) worst = std::max(worst, c.residual);
            }
            rec.set("worst_residual", worst);
            if (rm.zoo && !rm.zoo->ricci.empty()) {
                const RicciReport rr = ricci(conn, p, opt.tol);
                rec.set("declared_deviation",
                        declared_deviation(*rm.zoo, rr, p));
            }
        } catch (const Error& e) {
            set_error_fields(rec, e);
        }
        records[i] = std::move(rec);
    });

    JsonValue doc = document_header("validate", opt);
    JsonValue arr = JsonValue::array();
    double worst = 0.0, worst_declared = 0.0;
    int failed = 0;
    for (auto& rec : records) {
        if (rec.find("error"))
            ++failed;
        else {
            worst = std::max(worst, rec.at("worst_residual").as_double());
            if (const JsonValue* d = rec.find("declared_deviation"))
                worst_declared = std::max(worst_declared, d->as_double());
        }
        arr.push_back(std::move(rec));
    }
    doc.set("records", std::move(arr));

    // Structural identities of the connection at the sampled base points.
    std::vector<Vec> points;
    points.push_back(rm.model->center());
    const IdentityReport idr = validate_identities(conn, points, 1e-8);
    JsonValue agg = JsonValue::object();
    agg.set("worst_normalization_residual", worst);
    agg.set("failed_count", failed);
    if (rm.zoo && !rm.zoo->ricci.empty())
        agg.set("worst_declared_deviation", worst_declared);
    JsonValue ident = JsonValue::object();
    ident.set("splitting", idr.splitting);
    ident.set("metric", idr.metric);
    ident.set("bianchi", idr.bianchi);
    ident.set("hhv", idr.hhv);
    ident.set("hvh", idr.hvh);
    ident.set("pass", idr.pass);
    if (!idr.failure.empty()) ident.set("failure", idr.failure);
    agg.set("connection_identities", std::move(ident));
    doc.set("aggregate", std::move(agg));
    return doc;
}

// ---------------------------------------------------------------------------
// Error documents and rendering.

JsonValue error_document(ErrorKind kind, const std::string& message) {
    JsonValue doc = JsonValue::object();
    doc.set("schema", kReportSchema);
    doc.set("tool_version", kToolVersion);
    JsonValue err = JsonValue::object();
    err.set("kind", error_kind_name(kind));
    err.set("message", message);
    doc.set("error", std::move(err));
    return doc;
}

namespace {

void append_csv_cell(std::string& out, const std::string& cell) {
    const bool needs_quote =
        cell.find_first_of(",\"\n") != std::string::npos;
    if (!needs_quote) {
        out += cell;
        return;
    }
    out += '"';
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
}

std::string scalar_csv(const JsonValue& v) {
    switch (v.kind()) {
        case JsonValue::Kind::Null: return "";
        case JsonValue::Kind::Bool: return v.as_bool() ? "true" : "false";
        case JsonValue::Kind::Int: return std::to_string(v.as_int());
        case JsonValue::Kind::Double: {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", v.as_double());
            return buf;
        }
        case JsonValue::Kind::String: return v.as_string();
        default:
            throw Error(ErrorKind::Invalid,
                        "nested structures have no CSV form");
    }
}

// Flattens one record into (column, cell) pairs: arrays of scalars expand to
// indexed columns.
std::vector<std::pair<std::string, std::string>> flatten_record(
    const JsonValue& rec) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [key, value] : rec.members()) {
        if (value.kind() == JsonValue::Kind::Array) {
            int idx = 0;
            for (const auto& item : value.items())
                out.emplace_back(key + "_" + std::to_string(idx++),
                                 scalar_csv(item));
        } else {
            out.emplace_back(key, scalar_csv(value));
        }
    }
    return out;
}

std::string records_csv(const JsonValue& doc) {
    const JsonValue* records = doc.find("records");
    if (!records || records->items().empty()) return "";

    // Header: union of the flattened keys in first-appearance order.
    std::vector<std::string> header;
    std::vector<std::vector<std::pair<std::string, std::string>>> rows;
    for (const auto& rec : records->items()) {
        rows.push_back(flatten_record(rec));
        for (const auto& [key, cell] : rows.back()) {
            (void)cell;
            if (std::find(header.begin(), header.end(), key) == header.end())
                header.push_back(key);
        }
    }

    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        append_csv_cell(out, header[i]);
    }
    out += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out += ',';
            const auto it =
                std::find_if(row.begin(), row.end(), [&](const auto& kv) {
                    return kv.first == header[i];
                });
            if (it != row.end()) append_csv_cell(out, it->second);
        }
        out += '\n';
    }
    return out;
}

}  // namespace

std::string render_report(const JsonValue& doc, const std::string& format) {
    if (format == "json") return doc.dump(2) + "\n";
    if (format == "csv") return records_csv(doc);
    throw Error(ErrorKind::Invalid,
                "unknown format '" + format + "' (expected json|csv)");
}

}  // namespace subcurv
