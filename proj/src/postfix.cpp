#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fexkit/expr.hpp"

namespace fexkit {

TokenSequence split_tokens(std::string_view text) {
    TokenSequence out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string join_tokens(const TokenSequence& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

std::string format_number(double value) {
    if (value == 0.0) return "0";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) throw Error("format_number failed");
    return std::string(buf, ptr);
}

std::optional<double> parse_number(std::string_view token) {
    if (token.empty()) return std::nullopt;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (*first == '+') ++first;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

// ---------------------------------------------------------------------------

namespace {

void append_affine(TokenSequence& out, double alpha, double beta) {
    if (alpha != 1.0) {
        out.push_back(format_number(alpha));
        out.emplace_back("*");
    }
    if (beta != 0.0) {
        out.push_back(format_number(beta));
        out.emplace_back("+");
    }
}

void postfix_rec(const Expression& e, TokenSequence& out) {
    switch (e.kind()) {
        case NodeKind::Variable: out.push_back(variable_token(e.var_index())); return;
        case NodeKind::Constant: out.push_back(format_number(e.value())); return;
        case NodeKind::Unary: {
            const Op op = e.op();
            if (op == Op::Zero || e.alpha() == 0.0) {
                out.push_back(format_number(e.beta()));
                return;
            }
            if (op == Op::One) {
                out.push_back(format_number(e.alpha() + e.beta()));
                return;
            }
            postfix_rec(e.child(), out);
            if (op != Op::Id) out.emplace_back(op_token(op));
            append_affine(out, e.alpha(), e.beta());
            return;
        }
        case NodeKind::Binary:
            postfix_rec(e.left(), out);
            postfix_rec(e.right(), out);
            out.emplace_back(op_token(e.op()));
            return;
    }
}

}  // namespace

TokenSequence to_postfix(const Expression& expr) {
    TokenSequence out;
    postfix_rec(expr, out);
    return out;
}

namespace {

std::string infix_rec(const Expression& e) {
    switch (e.kind()) {
        case NodeKind::Variable: return variable_token(e.var_index());
        case NodeKind::Constant: {
            const std::string s = format_number(e.value());
            return e.value() < 0 ? "(" + s + ")" : s;
        }
        case NodeKind::Binary:
            return "(" + infix_rec(e.left()) + " " + std::string(op_token(e.op())) + " " + infix_rec(e.right()) + ")";
        case NodeKind::Unary: break;
    }
    const double a = e.alpha(), b = e.beta();
    std::string core;
    switch (e.op()) {
        case Op::Zero: return format_number(b);
        case Op::One: return format_number(a + b);
        case Op::Id: core = infix_rec(e.child()); break;
        case Op::Square: core = infix_rec(e.child()) + "^2"; break;
        case Op::Cube: core = infix_rec(e.child()) + "^3"; break;
        case Op::Quart: core = infix_rec(e.child()) + "^4"; break;
        case Op::Abs: core = "|" + infix_rec(e.child()) + "|"; break;
        default: {
            std::string name(op_token(e.op()));
            std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
            std::string arg = infix_rec(e.child());
            if (arg.front() != '(') arg = "(" + arg + ")";
            core = name + arg;
        }
    }
    if (a != 1.0) core = format_number(a) + "*" + core;
    if (b != 0.0) return "(" + core + (b < 0 ? " - " + format_number(-b) : " + " + format_number(b)) + ")";
    return core;
}

}  // namespace

std::string to_infix(const Expression& expr) { return infix_rec(expr); }

Expression parse_postfix(const TokenSequence& tokens, const OperatorDictionary& dictionary) {
    if (tokens.empty()) throw MalformedSequence("empty token sequence");
    std::vector<Expression> stack;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string& t = tokens[i];
        if (auto num = parse_number(t)) {
            stack.push_back(Expression::constant(*num));
            continue;
        }
        if (!dictionary.contains(t)) throw UnknownToken("unknown token '" + t + "' at position " + std::to_string(i));
        if (int k = variable_index(t); k > 0) {
            stack.push_back(Expression::variable(k));
            continue;
        }
        auto op = op_from_token(t);
        if (!op) throw UnknownToken("token '" + t + "' is not an operator or variable");
        const std::size_t arity = is_unary(*op) ? 1 : 2;
        if (stack.size() < arity)
            throw MalformedSequence("stack underflow at token '" + t + "' (position " + std::to_string(i) + ")");
        if (arity == 1) {
            Expression c = std::move(stack.back());
            stack.back() = Expression::unary(*op, std::move(c));
        } else {
            Expression r = std::move(stack.back());
            stack.pop_back();
            Expression l = std::move(stack.back());
            stack.back() = Expression::binary(*op, std::move(l), std::move(r));
        }
    }
    if (stack.size() != 1)
        throw MalformedSequence(std::to_string(stack.size()) + " operands left on the stack");
    return stack.front();
}

// ---------------------------------------------------------------------------

OperatorDictionary::OperatorDictionary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], i).second) throw ConfigError("duplicate dictionary token '" + tokens_[i] + "'");
    }
}

OperatorDictionary OperatorDictionary::example9() {
    return OperatorDictionary({"x1", "x2", "^2", "^3", "+", "*", "SIN", "COS", "EXP"});
}

OperatorDictionary OperatorDictionary::default_fex(int dim) {
    std::vector<std::string> t;
    for (int k = 1; k <= dim; ++k) t.push_back(variable_token(k));
    for (Op op : default_unary_ops()) t.emplace_back(op_token(op));
    for (Op op : default_binary_ops()) t.emplace_back(op_token(op));
    return OperatorDictionary(std::move(t));
}

OperatorDictionary OperatorDictionary::full(int dim) {
    std::vector<std::string> t;
    for (int k = 1; k <= dim; ++k) t.push_back(variable_token(k));
    for (Op op : all_ops())
        if (op != Op::Sign) t.emplace_back(op_token(op));
    return OperatorDictionary(std::move(t));
}

OperatorDictionary OperatorDictionary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dictionary file " + path);
    std::vector<std::string> t;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        auto toks = split_tokens(line);
        if (toks.empty()) continue;
        if (toks.size() > 1) throw ParseError("expected one token per line", n);
        t.push_back(toks[0]);
    }
    return OperatorDictionary(std::move(t));
}

void OperatorDictionary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dictionary file " + path);
    for (const auto& t : tokens_) out << t << '\n';
}

std::optional<std::size_t> OperatorDictionary::index_of(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

// ---------------------------------------------------------------------------

int variable_index(std::string_view token) {
    if (token.size() < 2 || token[0] != 'x') return 0;
    int k = 0;
    auto [ptr, ec] = std::from_chars(token.data() + 1, token.data() + token.size(), k);
    if (ec != std::errc() || ptr != token.data() + token.size() || k < 1 || token[1] == '0') return 0;
    return k;
}

bool is_variable_token(std::string_view token) { return variable_index(token) > 0; }

std::string variable_token(int index) { return "x" + std::to_string(index); }

int canonical_rank(std::string_view token) {
    if (int k = variable_index(token); k > 0) return k;
    if (auto op = op_from_token(token)) return 100000 + static_cast<int>(*op);
    return 200000;
}

OperatorSet make_operator_set(std::vector<std::string> tokens) {
    std::sort(tokens.begin(), tokens.end(), [](const std::string& a, const std::string& b) {
        const int ra = canonical_rank(a), rb = canonical_rank(b);
        return ra != rb ? ra < rb : a < b;
    });
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    return tokens;
}

OperatorSet set_union(const OperatorSet& a, const OperatorSet& b) {
    std::vector<std::string> all(a);
    all.insert(all.end(), b.begin(), b.end());
    return make_operator_set(std::move(all));
}

OperatorSet set_intersection(const OperatorSet& a, const OperatorSet& dictionary_tokens) {
    std::vector<std::string> out;
    for (const auto& t : a)
        if (std::find(dictionary_tokens.begin(), dictionary_tokens.end(), t) != dictionary_tokens.end())
            out.push_back(t);
    return make_operator_set(std::move(out));
}

OperatorSet extract_operator_set(const TokenSequence& tokens) {
    std::vector<std::string> out;
    for (const auto& t : tokens) {
        if (parse_number(t)) continue;
        if (is_variable_token(t) || op_from_token(t)) out.push_back(t);
    }
    return make_operator_set(std::move(out));
}

OperatorSet extract_operator_set(const Expression& expr) { return extract_operator_set(to_postfix(expr)); }

OperatorSetVector encode_operator_set(const OperatorSet& set, const OperatorDictionary& dictionary) {
    OperatorSetVector v{std::vector<std::uint8_t>(dictionary.size(), 0)};
    for (const auto& t : set) {
        auto i = dictionary.index_of(t);
        if (!i) throw UnknownToken("token '" + t + "' is not in the dictionary");
        v.bits[*i] = 1;
    }
    return v;
}

OperatorSet decode_operator_set(const OperatorSetVector& v, const OperatorDictionary& dictionary) {
    if (v.bits.size() != dictionary.size()) throw LengthMismatch("vector length differs from dictionary size");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.bits.size(); ++i)
        if (v.bits[i]) out.push_back(dictionary.token(i));
    return make_operator_set(std::move(out));
}

int mismatch(const OperatorSetVector& y, const OperatorSetVector& z) {
    if (y.bits.size() != z.bits.size())
        throw LengthMismatch("mismatch: lengths " + std::to_string(y.bits.size()) + " and " +
                             std::to_string(z.bits.size()));
    int s = 0;
    for (std::size_t i = 0; i < y.bits.size(); ++i) {
        const int d = static_cast<int>(y.bits[i]) - static_cast<int>(z.bits[i]);
        s += d * d;
    }
    return s;
}

}  // namespace fexkit
