// postproc.hpp - result post-processing: a small sandboxed expression
// language over result records (string templates with {expr} holes), plus
// number/unit and date normalization.
//
// Template syntax: literal text with `{expression}` holes ({{ and }} escape
// literal braces). Expressions cover field access (`r.name`, quoted for
// namespaced fields: `r."g1.price"`), the whole-result variable `Data`,
// the functions sort_by, top, filter, map, sum, avg, min, max, len, round,
// num, date, join_str, arithmetic, and comparisons. Anything outside that
// closed set is a parse error, so model-generated templates cannot smuggle
// code in. Every evaluation failure maps to the sentinel output "no data".
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "errag/common.hpp"

namespace errag {

//============================================================================
// Number and date normalization
//============================================================================

/// Multipliers applied to a unit suffix written with a space ("5 km").
/// Extendable through configuration; seeded with metric length units.
using UnitTable = std::map<std::string, double>;

inline const UnitTable& default_unit_table() {
    static const UnitTable table = {{"km", 1000.0}, {"m", 1.0}};
    return table;
}

/// Parses a human-formatted quantity into a number: currency symbols and
/// thousands separators are stripped; attached K/M/B suffixes scale by
/// 1e3/1e6/1e9 (case-insensitive); a space-separated suffix is looked up in
/// the unit table ("5 km" -> 5000, "5000 m" -> 5000). Throws NotANumber.
inline double normalize_number(const std::string& input,
                               const UnitTable& units = default_unit_table()) {
    auto issp = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
    std::string s = input;
    std::size_t b = 0, e = s.size();
    while (b < e && issp(s[b])) ++b;
    while (e > b && issp(s[e - 1])) --e;
    s = s.substr(b, e - b);
    if (s.empty()) throw Error(Errc::NotANumber, "empty string");

    static const char* currencies[] = {"$", "\xE2\x82\xAC", "\xC2\xA3", "\xC2\xA5"};
    for (const char* cur : currencies) {
        std::size_t n = std::strlen(cur);
        if (s.size() > n && s.compare(0, n, cur) == 0) {
            s = s.substr(n);
            break;
        }
    }

    std::string cleaned;
    for (char c : s)
        if (c != ',') cleaned.push_back(c);
    s = cleaned;
    while (!s.empty() && issp(s.front())) s.erase(s.begin());

    std::size_t pos = 0;
    if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) ++pos;
    std::size_t digits_start = pos;
    while (pos < s.size() && ((s[pos] >= '0' && s[pos] <= '9') || s[pos] == '.')) ++pos;
    if (pos == digits_start) throw Error(Errc::NotANumber, "'" + input + "'");
    auto value = parse_number(s.substr(0, pos));
    if (!value) throw Error(Errc::NotANumber, "'" + input + "'");

    bool spaced = false;
    while (pos < s.size() && issp(s[pos])) {
        spaced = true;
        ++pos;
    }
    std::string suffix = s.substr(pos);
    if (suffix.empty()) return *value;

    if (!spaced) {
        std::string folded = fold_ascii_lower(suffix);
        if (folded == "k") return *value * 1e3;
        if (folded == "m") return *value * 1e6;
        if (folded == "b") return *value * 1e9;
    }
    auto it = units.find(suffix);
    if (it == units.end()) it = units.find(fold_ascii_lower(suffix));
    if (it != units.end()) return *value * it->second;
    throw Error(Errc::NotANumber, "unknown suffix '" + suffix + "' in '" + input + "'");
}

namespace detail {

inline bool leap_year(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

inline int days_in_month(int y, int m) {
    static const int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && leap_year(y)) return 29;
    return days[m - 1];
}

inline bool valid_date(int y, int m, int d) {
    return y >= 1 && y <= 9999 && m >= 1 && m <= 12 && d >= 1 && d <= days_in_month(y, m);
}

inline std::string format_iso_date(int y, int m, int d) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
    return buf;
}

inline int month_from_name(const std::string& name) {
    static const char* months[] = {"january", "february", "march",     "april",
                                   "may",     "june",     "july",      "august",
                                   "september", "october", "november", "december"};
    std::string folded = fold_ascii_lower(name);
    for (int i = 0; i < 12; ++i) {
        std::string full = months[i];
        if (folded == full) return i + 1;
        if (folded.size() == 3 && full.compare(0, 3, folded) == 0) return i + 1;
    }
    return 0;
}

inline std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string part;
    for (char c : s) {
        if (c == sep) {
            out.push_back(part);
            part.clear();
        } else {
            part.push_back(c);
        }
    }
    out.push_back(part);
    return out;
}

inline bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    return true;
}

}  // namespace detail

/// Unifies date spellings into ISO YYYY-MM-DD. Accepts YYYY-MM-DD,
/// "Month D, YYYY" (full or 3-letter month name), and D/M/YYYY vs M/D/YYYY
/// with the ambiguity resolved month-first. Throws NotADate.
inline std::string normalize_date(const std::string& input) {
    std::string s;
    for (char c : input)
        if (c != '\t' && c != '\n' && c != '\r') s.push_back(c);
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    while (!s.empty() && s.back() == ' ') s.pop_back();
    if (s.empty()) throw Error(Errc::NotADate, "empty string");

    // YYYY-MM-DD
    if (s.find('-') != std::string::npos) {
        auto parts = detail::split_on(s, '-');
        if (parts.size() == 3 && detail::all_digits(parts[0]) && detail::all_digits(parts[1]) &&
            detail::all_digits(parts[2])) {
            int y = std::stoi(parts[0]), m = std::stoi(parts[1]), d = std::stoi(parts[2]);
            if (detail::valid_date(y, m, d)) return detail::format_iso_date(y, m, d);
        }
        throw Error(Errc::NotADate, "'" + input + "'");
    }

    // D/M/YYYY or M/D/YYYY (month-first when ambiguous)
    if (s.find('/') != std::string::npos) {
        auto parts = detail::split_on(s, '/');
        if (parts.size() == 3 && detail::all_digits(parts[0]) && detail::all_digits(parts[1]) &&
            detail::all_digits(parts[2])) {
            int a = std::stoi(parts[0]), bnum = std::stoi(parts[1]), y = std::stoi(parts[2]);
            if (detail::valid_date(y, a, bnum)) return detail::format_iso_date(y, a, bnum);
            if (detail::valid_date(y, bnum, a)) return detail::format_iso_date(y, bnum, a);
        }
        throw Error(Errc::NotADate, "'" + input + "'");
    }

    // "Month D, YYYY" (comma optional)
    {
        std::vector<std::string> words;
        std::string word;
        for (char c : s) {
            if (c == ' ' || c == ',') {
                if (!word.empty()) words.push_back(word);
                word.clear();
            } else {
                word.push_back(c);
            }
        }
        if (!word.empty()) words.push_back(word);
        if (words.size() == 3 && detail::all_digits(words[1]) && detail::all_digits(words[2])) {
            int m = detail::month_from_name(words[0]);
            int d = std::stoi(words[1]);
            int y = std::stoi(words[2]);
            if (m > 0 && detail::valid_date(y, m, d)) return detail::format_iso_date(y, m, d);
        }
    }
    throw Error(Errc::NotADate, "'" + input + "'");
}

//============================================================================
// Expression language
//============================================================================

namespace tpl {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind { Number, String, Data, Field, Call, Binary, Order };
    Kind kind = Kind::Number;
    double number = 0;              // Number
    std::string text;               // String literal, field name, call name,
                                    // binary operator, or "asc"/"desc"
    std::vector<ExprPtr> args;      // Call arguments / binary operands
};

struct Segment {
    bool is_expr = false;
    std::string literal;
    ExprPtr expr;
};

}  // namespace tpl

/// A parsed template: alternating literal text and expressions.
struct ResultTemplate {
    std::vector<tpl::Segment> segments;
};

inline constexpr std::string_view kNoData = "no data";

namespace tpl {

struct FunctionSig {
    const char* name;
    int min_args;
    int max_args;
};

inline const FunctionSig* find_function(const std::string& name) {
    static const FunctionSig sigs[] = {
        {"sort_by", 2, 3}, {"top", 2, 2},  {"filter", 2, 2}, {"map", 2, 2},
        {"sum", 1, 1},     {"avg", 1, 1},  {"min", 1, 1},    {"max", 1, 1},
        {"len", 1, 1},     {"round", 1, 2}, {"num", 1, 1},   {"date", 1, 1},
        {"join_str", 2, 2},
    };
    for (const FunctionSig& s : sigs)
        if (name == s.name) return &s;
    return nullptr;
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    ResultTemplate parse_template() {
        ResultTemplate tpl;
        std::string literal;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '{') {
                if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '{') {
                    literal.push_back('{');
                    pos_ += 2;
                    continue;
                }
                if (!literal.empty()) {
                    tpl.segments.push_back({false, std::move(literal), nullptr});
                    literal.clear();
                }
                ++pos_;
                ExprPtr expr = parse_expr();
                skip_ws();
                if (pos_ >= text_.size() || text_[pos_] != '}')
                    fail("'}' closing the expression");
                ++pos_;
                tpl.segments.push_back({true, {}, expr});
                continue;
            }
            if (c == '}') {
                if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '}') {
                    literal.push_back('}');
                    pos_ += 2;
                    continue;
                }
                fail("'}}' (lone '}' in literal text)");
            }
            literal.push_back(c);
            ++pos_;
        }
        if (!literal.empty()) tpl.segments.push_back({false, std::move(literal), nullptr});
        return tpl;
    }

    ExprPtr parse_standalone_expr() {
        ExprPtr e = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) fail("end of expression");
        return e;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& expected) {
        throw Error(Errc::TemplateSyntax, "expected " + expected, pos_);
    }

    void skip_ws() {
        while (pos_ < text_.size() &&
               (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
                text_[pos_] == '\r'))
            ++pos_;
    }

    bool try_token(std::string_view tok) {
        skip_ws();
        if (text_.substr(pos_, tok.size()) == tok) {
            pos_ += tok.size();
            return true;
        }
        return false;
    }

    static ExprPtr make(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

    ExprPtr parse_expr() { return parse_compare(); }

    ExprPtr parse_compare() {
        ExprPtr left = parse_additive();
        skip_ws();
        static const char* ops[] = {"==", "!=", "<=", ">=", "=", "<", ">"};
        for (const char* op : ops) {
            if (try_token(op)) {
                ExprPtr right = parse_additive();
                Expr e;
                e.kind = Expr::Kind::Binary;
                e.text = std::strcmp(op, "==") == 0 ? "=" : op;
                e.args = {left, right};
                return make(std::move(e));
            }
        }
        return left;
    }

    ExprPtr parse_additive() {
        ExprPtr left = parse_multiplicative();
        while (true) {
            skip_ws();
            if (try_token("+")) {
                left = binary("+", left, parse_multiplicative());
            } else if (pos_ < text_.size() && text_[pos_] == '-') {
                ++pos_;
                left = binary("-", left, parse_multiplicative());
            } else {
                break;
            }
        }
        return left;
    }

    ExprPtr parse_multiplicative() {
        ExprPtr left = parse_unary();
        while (true) {
            skip_ws();
            if (try_token("*")) {
                left = binary("*", left, parse_unary());
            } else if (try_token("/")) {
                left = binary("/", left, parse_unary());
            } else {
                break;
            }
        }
        return left;
    }

    ExprPtr binary(const char* op, ExprPtr l, ExprPtr r) {
        Expr e;
        e.kind = Expr::Kind::Binary;
        e.text = op;
        e.args = {std::move(l), std::move(r)};
        return make(std::move(e));
    }

    ExprPtr parse_unary() {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '-') {
            ++pos_;
            Expr zero;
            zero.kind = Expr::Kind::Number;
            zero.number = 0;
            return binary("-", make(std::move(zero)), parse_unary());
        }
        return parse_primary();
    }

    ExprPtr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("an expression");
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            ExprPtr inner = parse_expr();
            skip_ws();
            if (pos_ >= text_.size() || text_[pos_] != ')') fail("')'");
            ++pos_;
            return inner;
        }
        if (c == '"') {
            Expr e;
            e.kind = Expr::Kind::String;
            e.text = parse_string_literal();
            return make(std::move(e));
        }
        if ((c >= '0' && c <= '9') || c == '.') {
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   ((text_[pos_] >= '0' && text_[pos_] <= '9') || text_[pos_] == '.' ||
                    text_[pos_] == 'e' || text_[pos_] == 'E' ||
                    ((text_[pos_] == '+' || text_[pos_] == '-') &&
                     (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E'))))
                ++pos_;
            auto num = parse_number(std::string(text_.substr(start, pos_ - start)));
            if (!num) fail("a number");
            Expr e;
            e.kind = Expr::Kind::Number;
            e.number = *num;
            return make(std::move(e));
        }
        std::string ident = parse_ident();
        if (ident.empty()) fail("an expression");
        if (ident == "Data") {
            Expr e;
            e.kind = Expr::Kind::Data;
            return make(std::move(e));
        }
        if (ident == "asc" || ident == "desc") {
            Expr e;
            e.kind = Expr::Kind::Order;
            e.text = ident;
            return make(std::move(e));
        }
        if (ident == "r") {
            skip_ws();
            if (pos_ >= text_.size() || text_[pos_] != '.') fail("'.' after r");
            ++pos_;
            skip_ws();
            Expr e;
            e.kind = Expr::Kind::Field;
            if (pos_ < text_.size() && text_[pos_] == '"') {
                e.text = parse_string_literal();
            } else {
                e.text = parse_ident();
                if (e.text.empty()) fail("field name after r.");
            }
            return make(std::move(e));
        }
        // function call
        const FunctionSig* sig = find_function(ident);
        if (!sig) throw Error(Errc::TemplateSyntax, "unknown name '" + ident + "'", pos_);
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] != '(') fail("'(' after " + ident);
        ++pos_;
        Expr e;
        e.kind = Expr::Kind::Call;
        e.text = ident;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ')') {
            ++pos_;
        } else {
            while (true) {
                e.args.push_back(parse_expr());
                skip_ws();
                if (pos_ < text_.size() && text_[pos_] == ',') {
                    ++pos_;
                    continue;
                }
                if (pos_ < text_.size() && text_[pos_] == ')') {
                    ++pos_;
                    break;
                }
                fail("',' or ')' in argument list");
            }
        }
        int argc = static_cast<int>(e.args.size());
        if (argc < sig->min_args || argc > sig->max_args)
            throw Error(Errc::TemplateSyntax,
                        std::string(ident) + " takes " + std::to_string(sig->min_args) +
                            (sig->max_args == sig->min_args
                                 ? ""
                                 : ".." + std::to_string(sig->max_args)) +
                            " arguments",
                        pos_);
        return make(std::move(e));
    }

    std::string parse_ident() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               ((text_[pos_] >= 'a' && text_[pos_] <= 'z') ||
                (text_[pos_] >= 'A' && text_[pos_] <= 'Z') ||
                (text_[pos_] >= '0' && text_[pos_] <= '9') || text_[pos_] == '_'))
            ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }

    std::string parse_string_literal() {
        ++pos_;  // opening quote
        std::string out;
        while (true) {
            if (pos_ >= text_.size()) fail("closing '\"'");
            char c = text_[pos_++];
            if (c == '"') break;
            if (c == '\\') {
                if (pos_ >= text_.size()) fail("escape character");
                char esc = text_[pos_++];
                switch (esc) {
                    case '\\': out.push_back('\\'); break;
                    case '"': out.push_back('"'); break;
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    default: fail("a valid escape");
                }
            } else {
                out.push_back(c);
            }
        }
        return out;
    }
};

//----------------------------------------------------------------------------
// Evaluation
//----------------------------------------------------------------------------

struct PValue {
    enum class Kind { Null, Number, Text, List };
    Kind kind = Kind::Null;
    double number = 0;
    std::string text;
    std::vector<PValue> list;
    const Record* record = nullptr;  // set on list elements drawn from Data

    static PValue null() { return {}; }
    static PValue num(double d) {
        PValue v;
        v.kind = Kind::Number;
        v.number = d;
        return v;
    }
    static PValue str(std::string s) {
        PValue v;
        v.kind = Kind::Text;
        v.text = std::move(s);
        return v;
    }
};

class Evaluator {
public:
    Evaluator(const EntitySet& data, const UnitTable& units) : data_(data), units_(units) {}

    PValue eval(const ExprPtr& e, const Record* current) {
        switch (e->kind) {
            case Expr::Kind::Number:
                return PValue::num(e->number);
            case Expr::Kind::String:
                return PValue::str(e->text);
            case Expr::Kind::Order:
                throw Error(Errc::EvalError, "sort order outside sort_by");
            case Expr::Kind::Data: {
                PValue v;
                v.kind = PValue::Kind::List;
                for (const Record& rec : data_.records) {
                    PValue item;
                    item.kind = PValue::Kind::Null;
                    item.record = &rec;
                    v.list.push_back(std::move(item));
                }
                return v;
            }
            case Expr::Kind::Field:
                return field(e->text, current);
            case Expr::Kind::Binary:
                return binary(e, current);
            case Expr::Kind::Call:
                return call(e, current);
        }
        throw Error(Errc::EvalError, "unreachable");
    }

    std::string stringify(const PValue& v) {
        switch (v.kind) {
            case PValue::Kind::Null:
                if (v.record) throw Error(Errc::EvalError, "record used as text");
                return "null";
            case PValue::Kind::Number:
                return format_number(v.number);
            case PValue::Kind::Text:
                return v.text;
            case PValue::Kind::List: {
                std::string out;
                for (std::size_t i = 0; i < v.list.size(); ++i) {
                    if (i) out += ", ";
                    out += stringify(v.list[i]);
                }
                return out;
            }
        }
        return {};
    }

private:
    const EntitySet& data_;
    const UnitTable& units_;

    PValue field(const std::string& name, const Record* current) {
        if (!current) throw Error(Errc::EvalError, "r used outside a per-record function");
        auto it = current->find(name);
        if (it == current->end()) {
            // allow bare names for namespaced fields when unambiguous
            const std::string suffix = "." + name;
            const Record::value_type* unique = nullptr;
            for (const auto& kv : *current) {
                if (kv.first.size() > suffix.size() &&
                    kv.first.compare(kv.first.size() - suffix.size(), suffix.size(), suffix) ==
                        0) {
                    if (unique) throw Error(Errc::EvalError, "field '" + name + "' is ambiguous");
                    unique = &kv;
                }
            }
            if (!unique) throw Error(Errc::EvalError, "no field '" + name + "'");
            return from_value(unique->second);
        }
        return from_value(it->second);
    }

    static PValue from_value(const Value& v) {
        if (is_null(v)) return PValue::null();
        if (auto n = as_number(v)) return PValue::num(*n);
        return PValue::str(std::get<std::string>(v));
    }

    double want_number(const PValue& v) {
        if (v.kind == PValue::Kind::Number) return v.number;
        if (v.kind == PValue::Kind::Text) return normalize_number(v.text, units_);
        throw Error(Errc::EvalError, "expected a number");
    }

    PValue binary(const ExprPtr& e, const Record* current) {
        PValue l = eval(e->args[0], current);
        PValue r = eval(e->args[1], current);
        const std::string& op = e->text;
        if (op == "+" || op == "-" || op == "*" || op == "/") {
            double a = want_number(l), b = want_number(r);
            if (op == "+") return PValue::num(a + b);
            if (op == "-") return PValue::num(a - b);
            if (op == "*") return PValue::num(a * b);
            if (b == 0) throw Error(Errc::EvalError, "division by zero");
            return PValue::num(a / b);
        }
        int cmp = compare(l, r);
        bool out = op == "=" ? cmp == 0
                   : op == "!=" ? cmp != 0
                   : op == "<" ? cmp < 0
                   : op == "<=" ? cmp <= 0
                   : op == ">" ? cmp > 0
                                : cmp >= 0;
        return PValue::num(out ? 1 : 0);
    }

    int compare(const PValue& a, const PValue& b) {
        if (a.kind == PValue::Kind::Number && b.kind == PValue::Kind::Number)
            return a.number < b.number ? -1 : (a.number > b.number ? 1 : 0);
        if (a.kind == PValue::Kind::Text && b.kind == PValue::Kind::Text) {
            int c = a.text.compare(b.text);
            return c < 0 ? -1 : (c > 0 ? 1 : 0);
        }
        throw Error(Errc::EvalError, "incomparable values");
    }

    static bool truthy(const PValue& v) {
        switch (v.kind) {
            case PValue::Kind::Null: return false;
            case PValue::Kind::Number: return v.number != 0;
            case PValue::Kind::Text: return !v.text.empty();
            case PValue::Kind::List: return !v.list.empty();
        }
        return false;
    }

    const Record* record_of(const PValue& item) {
        if (!item.record) throw Error(Errc::EvalError, "expected a record element");
        return item.record;
    }

    PValue want_list(const ExprPtr& e, const Record* current) {
        PValue v = eval(e, current);
        if (v.kind != PValue::Kind::List) throw Error(Errc::EvalError, "expected a list");
        return v;
    }

    PValue call(const ExprPtr& e, const Record* current) {
        const std::string& fn = e->text;
        if (fn == "num") return PValue::num(want_number(eval(e->args[0], current)));
        if (fn == "date") {
            PValue v = eval(e->args[0], current);
            if (v.kind != PValue::Kind::Text) throw Error(Errc::EvalError, "date() wants text");
            return PValue::str(normalize_date(v.text));
        }
        if (fn == "round") {
            double x = want_number(eval(e->args[0], current));
            double digits = e->args.size() > 1 ? want_number(eval(e->args[1], current)) : 0;
            double scale = std::pow(10.0, std::floor(digits));
            return PValue::num(std::round(x * scale) / scale);
        }
        if (fn == "len") {
            PValue v = eval(e->args[0], current);
            if (v.kind == PValue::Kind::List) return PValue::num(double(v.list.size()));
            if (v.kind == PValue::Kind::Text) return PValue::num(double(v.text.size()));
            throw Error(Errc::EvalError, "len() wants a list or text");
        }
        if (fn == "sum" || fn == "avg" || fn == "min" || fn == "max") {
            PValue v = want_list(e->args[0], current);
            if (v.list.empty()) throw Error(Errc::EvalError, fn + " of an empty list");
            double acc = 0;
            bool first = true;
            for (const PValue& item : v.list) {
                double x = want_number(item);
                if (fn == "sum" || fn == "avg") {
                    acc += x;
                } else if (first) {
                    acc = x;
                } else if (fn == "min") {
                    acc = std::min(acc, x);
                } else {
                    acc = std::max(acc, x);
                }
                first = false;
            }
            if (fn == "avg") acc /= double(v.list.size());
            return PValue::num(acc);
        }
        if (fn == "top") {
            PValue v = want_list(e->args[0], current);
            double n = want_number(eval(e->args[1], current));
            if (n < 0) throw Error(Errc::EvalError, "top() wants n >= 0");
            std::size_t keep = std::min(v.list.size(), static_cast<std::size_t>(n));
            v.list.resize(keep);
            return v;
        }
        if (fn == "map") {
            PValue v = want_list(e->args[0], current);
            PValue out;
            out.kind = PValue::Kind::List;
            for (const PValue& item : v.list)
                out.list.push_back(eval(e->args[1], record_of(item)));
            return out;
        }
        if (fn == "filter") {
            PValue v = want_list(e->args[0], current);
            PValue out;
            out.kind = PValue::Kind::List;
            for (const PValue& item : v.list)
                if (truthy(eval(e->args[1], record_of(item)))) out.list.push_back(item);
            return out;
        }
        if (fn == "sort_by") {
            PValue v = want_list(e->args[0], current);
            bool descending = false;
            if (e->args.size() == 3) {
                if (e->args[2]->kind != Expr::Kind::Order)
                    throw Error(Errc::EvalError, "sort_by order must be asc or desc");
                descending = e->args[2]->text == "desc";
            }
            std::vector<std::pair<PValue, PValue>> keyed;  // (key, item)
            keyed.reserve(v.list.size());
            for (const PValue& item : v.list)
                keyed.emplace_back(eval(e->args[1], record_of(item)), item);
            std::stable_sort(keyed.begin(), keyed.end(),
                             [&](const auto& a, const auto& b) {
                                 int c = compare(a.first, b.first);
                                 return descending ? c > 0 : c < 0;
                             });
            PValue out;
            out.kind = PValue::Kind::List;
            for (auto& [key, item] : keyed) out.list.push_back(std::move(item));
            return out;
        }
        if (fn == "join_str") {
            PValue v = want_list(e->args[0], current);
            PValue sep = eval(e->args[1], current);
            if (sep.kind != PValue::Kind::Text)
                throw Error(Errc::EvalError, "join_str separator must be text");
            std::string out;
            for (std::size_t i = 0; i < v.list.size(); ++i) {
                if (i) out += sep.text;
                out += stringify(v.list[i]);
            }
            return PValue::str(std::move(out));
        }
        throw Error(Errc::EvalError, "unknown function '" + fn + "'");
    }
};

}  // namespace tpl

/// Parses template text. Throws Errc::TemplateSyntax on malformed input or
/// constructs outside the closed expression language.
inline ResultTemplate parse_template(std::string_view text) {
    return tpl::Parser(text).parse_template();
}

/// Evaluates a template over result records. Any expression failure yields
/// the sentinel "no data" for the whole template; this function never
/// throws.
inline std::string eval_template(const ResultTemplate& tpl, const EntitySet& data,
                                 const UnitTable& units = default_unit_table()) noexcept {
    try {
        tpl::Evaluator ev(data, units);
        std::string out;
        for (const tpl::Segment& seg : tpl.segments) {
            if (!seg.is_expr) {
                out += seg.literal;
                continue;
            }
            out += ev.stringify(ev.eval(seg.expr, nullptr));
        }
        return out;
    } catch (...) {
        return std::string(kNoData);
    }
}

/// Parse-and-evaluate convenience; parse errors also yield the sentinel.
inline std::string render_result(std::string_view template_text, const EntitySet& data,
                                 const UnitTable& units = default_unit_table()) noexcept {
    try {
        return eval_template(parse_template(template_text), data, units);
    } catch (...) {
        return std::string(kNoData);
    }
}

}  // namespace errag
