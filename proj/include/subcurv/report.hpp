#pragma once
// Machine-readable reports: JSON documents (ordered keys, floats printed
// with 17 significant digits so identical runs are byte-identical), CSV
// flattening of the per-covector records, and the command implementations
// behind the command-line front end.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "subcurv/error.hpp"

namespace subcurv {

inline constexpr int kReportSchema = 1;
inline constexpr const char* kToolVersion = "1.0.0";

// Minimal JSON value with insertion-ordered objects and deterministic
// serialization.  Doubles print with "%.17g"; non-finite values serialize as
// null (JSON has no infinities).
class JsonValue {
  public:
    enum class Kind { Null, Bool, Int, Double, String, Array, Object };

    JsonValue() : kind_(Kind::Null) {}
    JsonValue(bool b) : kind_(Kind::Bool), bool_(b) {}
    JsonValue(int v) : kind_(Kind::Int), int_(v) {}
    JsonValue(std::int64_t v) : kind_(Kind::Int), int_(v) {}
    JsonValue(unsigned v) : kind_(Kind::Int), int_(v) {}
    JsonValue(double v) : kind_(Kind::Double), double_(v) {}
    JsonValue(const char* s) : kind_(Kind::String), string_(s) {}
    JsonValue(std::string s) : kind_(Kind::String), string_(std::move(s)) {}

    static JsonValue array() {
        JsonValue v;
        v.kind_ = Kind::Array;
        return v;
    }
    static JsonValue object() {
        JsonValue v;
        v.kind_ = Kind::Object;
        return v;
    }

    Kind kind() const { return kind_; }
    bool is_null() const { return kind_ == Kind::Null; }

    // Array access.
    JsonValue& push_back(JsonValue v);
    const std::vector<JsonValue>& items() const;
    std::size_t size() const;

    // Object access (insertion order preserved; set replaces in place).
    JsonValue& set(const std::string& key, JsonValue v);
    const JsonValue* find(const std::string& key) const;  // null if absent
    const JsonValue& at(const std::string& key) const;    // throws if absent
    const std::vector<std::pair<std::string, JsonValue>>& members() const;

    bool as_bool() const;
    std::int64_t as_int() const;
    double as_double() const;  // accepts Int and Double
    const std::string& as_string() const;

    void dump(std::string& out, int indent = 0, int depth = 0) const;
    std::string dump(int indent = 0) const;

  private:
    Kind kind_ = Kind::Null;
    bool bool_ = false;
    std::int64_t int_ = 0;
    double double_ = 0.0;
    std::string string_;
    std::vector<JsonValue> array_;
    std::vector<std::pair<std::string, JsonValue>> object_;
};

// Shared options of the report commands (mirrors the CLI flags).
struct ReportOptions {
    std::string model = "heisenberg";  // zoo name or path to a JSON model
    std::string connection = "nice";   // "nice" | "group"
    int samples = 16;
    unsigned seed = 0;
    double t_max = 20.0;
    double tol = 1e-7;
    double vertical_range = 3.0;
    bool timestamp = true;  // false makes reports fully reproducible

    // Inputs of the standalone comparison-problem command.
    std::vector<int> lq_columns = {1};
    std::vector<double> lq_potential = {1.0};
};

// Command implementations.  Each returns one JSON document with fields
// schema / tool_version / command / options / records / aggregate; per-record
// failures are captured as error entries instead of aborting the run.
JsonValue cmd_classify(const ReportOptions& opt);
JsonValue cmd_ricci(const ReportOptions& opt);
JsonValue cmd_bonnet_myers(const ReportOptions& opt);
JsonValue cmd_lq(const ReportOptions& opt);
JsonValue cmd_validate(const ReportOptions& opt);

// Structured error document (what the CLI emits on failure, exit nonzero).
JsonValue error_document(ErrorKind kind, const std::string& message);

// Renders a document: "json" pretty-prints it; "csv" flattens the records
// array (vector-valued fields expand to indexed columns).
std::string render_report(const JsonValue& doc, const std::string& format);

}  // namespace subcurv
