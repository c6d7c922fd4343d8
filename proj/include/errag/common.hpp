// common.hpp - shared value model and error taxonomy
#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace errag {

//============================================================================
// Errors
//============================================================================

enum class Errc {
    // chain_dsl
    SyntaxError,
    ValidationError,
    // catalog
    DuplicateSource,
    UnknownSource,
    NotRelational,
    EmptyCatalog,
    // executor
    EdgeMismatch,
    MissingJoinAttribute,
    ExtractionFailed,
    UnanchoredPlan,
    AdapterError,
    ResultTooLarge,
    JoinFanoutExceeded,
    PlanConflict,
    // relational
    NoTableSelector,
    MultipleTableSelectors,
    UnknownTable,
    UnknownColumn,
    TypeError,
    StoreError,
    // kg
    EntityNotFound,
    // docs
    EmptyIndex,
    // gateway
    UnknownTemplate,
    MissingBinding,
    NoCannedResponse,
    Timeout,
    HttpError,
    MalformedResponse,
    GatewayError,
    // selection / evalkit
    DomainError,
    MissingLogEntry,
    UnparseableVerdict,
    // postproc
    NotANumber,
    NotADate,
    TemplateSyntax,
    EvalError,
    // io
    IoError,
    ConfigError,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::SyntaxError: return "SyntaxError";
        case Errc::ValidationError: return "ValidationError";
        case Errc::DuplicateSource: return "DuplicateSource";
        case Errc::UnknownSource: return "UnknownSource";
        case Errc::NotRelational: return "NotRelational";
        case Errc::EmptyCatalog: return "EmptyCatalog";
        case Errc::EdgeMismatch: return "EdgeMismatch";
        case Errc::MissingJoinAttribute: return "MissingJoinAttribute";
        case Errc::ExtractionFailed: return "ExtractionFailed";
        case Errc::UnanchoredPlan: return "UnanchoredPlan";
        case Errc::AdapterError: return "AdapterError";
        case Errc::ResultTooLarge: return "ResultTooLarge";
        case Errc::JoinFanoutExceeded: return "JoinFanoutExceeded";
        case Errc::PlanConflict: return "PlanConflict";
        case Errc::NoTableSelector: return "NoTableSelector";
        case Errc::MultipleTableSelectors: return "MultipleTableSelectors";
        case Errc::UnknownTable: return "UnknownTable";
        case Errc::UnknownColumn: return "UnknownColumn";
        case Errc::TypeError: return "TypeError";
        case Errc::StoreError: return "StoreError";
        case Errc::EntityNotFound: return "EntityNotFound";
        case Errc::EmptyIndex: return "EmptyIndex";
        case Errc::UnknownTemplate: return "UnknownTemplate";
        case Errc::MissingBinding: return "MissingBinding";
        case Errc::NoCannedResponse: return "NoCannedResponse";
        case Errc::Timeout: return "Timeout";
        case Errc::HttpError: return "HttpError";
        case Errc::MalformedResponse: return "MalformedResponse";
        case Errc::GatewayError: return "GatewayError";
        case Errc::DomainError: return "DomainError";
        case Errc::MissingLogEntry: return "MissingLogEntry";
        case Errc::UnparseableVerdict: return "UnparseableVerdict";
        case Errc::NotANumber: return "NotANumber";
        case Errc::NotADate: return "NotADate";
        case Errc::TemplateSyntax: return "TemplateSyntax";
        case Errc::EvalError: return "EvalError";
        case Errc::IoError: return "IoError";
        case Errc::ConfigError: return "ConfigError";
    }
    return "Error";
}

/// Single exception type carrying a machine-checkable code. `position` is
/// a byte offset where that makes sense (parsers); `detail` names the
/// offending entity (node alias, column, template hole, ...).
class Error : public std::runtime_error {
public:
    Error(Errc code, std::string message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message),
          code_(code) {}

    Error(Errc code, std::string message, std::size_t position)
        : std::runtime_error(std::string(errc_name(code)) + " at " +
                             std::to_string(position) + ": " + message),
          code_(code), position_(position) {}

    Error(Errc code, std::string message, std::string detail)
        : std::runtime_error(std::string(errc_name(code)) + " [" + detail +
                             "]: " + message),
          code_(code), detail_(std::move(detail)) {}

    Errc code() const noexcept { return code_; }
    std::optional<std::size_t> position() const noexcept { return position_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::optional<std::size_t> position_;
    std::string detail_;
};

//============================================================================
// Values and records
//============================================================================

/// Attribute value flowing through the system: null, number or text.
/// Numbers are doubles; integral doubles print without a fraction part.
using Value = std::variant<std::monostate, double, std::string>;

inline bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }

inline std::optional<double> as_number(const Value& v) {
    if (const double* d = std::get_if<double>(&v)) return *d;
    return std::nullopt;
}

/// Shortest decimal rendering that round-trips; integral values drop ".0".
inline std::string format_number(double d) {
    if (std::isfinite(d) && d == std::floor(d) && std::fabs(d) < 9.007199254740992e15) {
        long long ll = static_cast<long long>(d);
        return std::to_string(ll);
    }
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
    (void)ec;
    return std::string(buf, p);
}

/// Full-string numeric parse (decimal, optional sign/fraction/exponent).
inline std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double out = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [p, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || p != last) return std::nullopt;
    if (!std::isfinite(out)) return std::nullopt;
    return out;
}

inline std::string to_display(const Value& v) {
    if (is_null(v)) return "null";
    if (const double* d = std::get_if<double>(&v)) return format_number(*d);
    return std::get<std::string>(v);
}

inline std::string fold_ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

/// Three-valued comparison outcome used wherever SQL-style null semantics
/// apply (unknown never satisfies a filter).
enum class Tri { False, True, Unknown };

inline Tri tri_of(bool b) { return b ? Tri::True : Tri::False; }

/// Compare two values the way the relational layer does: numeric when both
/// sides are (or can become) numbers, else binary string order. Numbers sort
/// before text when types genuinely differ. Null yields Unknown.
/// Returns <0, 0, >0 through `out`; Tri::Unknown when incomparable.
inline Tri compare_values(const Value& a, const Value& b, int& out) {
    if (is_null(a) || is_null(b)) return Tri::Unknown;
    auto na = as_number(a);
    auto nb = as_number(b);
    if (na && !nb) nb = parse_number(std::get<std::string>(b));
    if (nb && !na) na = parse_number(std::get<std::string>(a));
    if (na && nb) {
        out = (*na < *nb) ? -1 : (*na > *nb ? 1 : 0);
        return Tri::True;
    }
    if (na && !nb) { out = -1; return Tri::True; }  // number sorts before text
    if (!na && nb) { out = 1; return Tri::True; }
    const std::string& sa = std::get<std::string>(a);
    const std::string& sb = std::get<std::string>(b);
    out = sa.compare(sb);
    out = out < 0 ? -1 : (out > 0 ? 1 : 0);
    return Tri::True;
}

/// A single result row: attribute name -> value, deterministically ordered.
using Record = std::map<std::string, Value>;

/// Ordered collection of records exchanged between operators. `provenance`
/// is the set of node aliases whose attributes this set carries; records key
/// attributes as "alias.attr" once a set has passed through the executor.
struct EntitySet {
    std::vector<Record> records;
    std::set<std::string> provenance;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

}  // namespace errag
