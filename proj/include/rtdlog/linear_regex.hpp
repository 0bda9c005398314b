// Small regex engine with guaranteed linear-time matching.
//
// Normalization rules run on every log line at scoring time, and rule patterns
// are user-editable config, so matching must never backtrack exponentially.
// Patterns compile to a Thompson NFA executed by set simulation: O(len * states)
// per match attempt, for any pattern.
//
// Supported syntax: literals, '.', escapes (\d \D \w \W \s \S and escaped
// punctuation), classes [...] with ranges and ^ negation, groups (...),
// alternation |, quantifiers * + ? {m} {m,} {m,n}, the zero-width assertions
// \b ^ $, and single-character lookbehind (?<=X) / (?<!X) where X is one
// literal, escape class, or [...] class. Matching is leftmost-longest.
// No captures, no backreferences.

#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "rtdlog/common.hpp"

namespace rtdlog {

class LinearRegex {
public:
    static constexpr size_t npos = static_cast<size_t>(-1);

    explicit LinearRegex(std::string_view pattern) : pattern_(pattern) {
        Parser parser(pattern);
        auto ast = parser.parse();
        Frag frag = compile(*ast);
        accept_ = add_state(State{Kind::Accept, {}, 0, 0});
        patch(frag.out, accept_);
        start_ = frag.start;
        if (states_.size() > kMaxStates) throw UsageError("regex too large: " + pattern_);
        compute_first_bytes();
    }

    const std::string& pattern() const { return pattern_; }

    // Longest match beginning exactly at `pos`; returns the end offset, or
    // npos when nothing (or only the empty string) matches there.
    size_t match_at(std::string_view text, size_t pos) const {
        SimState sim(states_.size());
        size_t last_accept = npos;
        add_closure(sim.current, start_, text, pos, sim);
        if (sim.current.empty()) return npos;
        for (size_t p = pos; p <= text.size(); ++p) {
            if (sim.contains_accept) last_accept = p;
            if (p == text.size()) break;
            unsigned char c = static_cast<unsigned char>(text[p]);
            sim.next.clear();
            sim.contains_accept = false;
            ++sim.stamp_value;
            for (int s : sim.current) {
                const State& st = states_[static_cast<size_t>(s)];
                if (st.kind == Kind::Char && st.cls->test(c)) {
                    add_closure(sim.next, st.next1, text, p + 1, sim);
                }
            }
            std::swap(sim.current, sim.next);
            if (sim.current.empty()) break;
        }
        return (last_accept == pos) ? npos : last_accept;  // empty matches rejected
    }

    bool search(std::string_view text) const {
        for (size_t i = 0; i < text.size(); ++i) {
            if (!first_bytes_.test(static_cast<unsigned char>(text[i]))) continue;
            if (match_at(text, i) != npos) return true;
        }
        return false;
    }

    // Replaces every leftmost-longest non-overlapping match.
    std::string replace_all(std::string_view text, std::string_view replacement) const {
        std::string out;
        out.reserve(text.size());
        size_t i = 0;
        while (i < text.size()) {
            bool feasible = first_bytes_.test(static_cast<unsigned char>(text[i]));
            size_t end = feasible ? match_at(text, i) : npos;
            if (end != npos) {
                out.append(replacement);
                i = end;
            } else {
                out.push_back(text[i]);
                ++i;
            }
        }
        return out;
    }

private:
    using ByteSet = std::bitset<256>;
    static constexpr size_t kMaxStates = 20000;

    enum class Kind : uint8_t { Char, Split, WordBoundary, Bol, Eol, Behind, BehindNeg, Accept };

    struct State {
        Kind kind;
        std::shared_ptr<ByteSet> cls;  // Char and lookbehind kinds
        int next1 = -1;
        int next2 = -1;  // Split only
    };

    // --- AST ---------------------------------------------------------------
    enum class NodeKind : uint8_t {
        Chars,
        Concat,
        Alt,
        Rep,
        WordBoundary,
        Bol,
        Eol,
        Behind,
        BehindNeg,
        Empty
    };
    struct Node {
        NodeKind kind;
        ByteSet cls;
        std::vector<std::unique_ptr<Node>> kids;
        int rep_min = 0;
        int rep_max = -1;  // -1 = unbounded

        std::unique_ptr<Node> clone() const {
            auto n = std::make_unique<Node>();
            n->kind = kind;
            n->cls = cls;
            n->rep_min = rep_min;
            n->rep_max = rep_max;
            for (const auto& k : kids) n->kids.push_back(k->clone());
            return n;
        }
    };

    class Parser {
    public:
        explicit Parser(std::string_view p) : p_(p) {}

        std::unique_ptr<Node> parse() {
            auto n = parse_alt();
            if (pos_ != p_.size()) fail("unexpected ')'");
            return n;
        }

    private:
        std::string_view p_;
        size_t pos_ = 0;

        [[noreturn]] void fail(const std::string& msg) {
            throw UsageError("regex syntax error at offset " + std::to_string(pos_) + ": " + msg +
                             " in /" + std::string(p_) + "/");
        }
        bool eof() const { return pos_ >= p_.size(); }
        char peek() const { return p_[pos_]; }
        char take() {
            if (eof()) fail("unexpected end");
            return p_[pos_++];
        }

        std::unique_ptr<Node> make(NodeKind k) {
            auto n = std::make_unique<Node>();
            n->kind = k;
            return n;
        }

        std::unique_ptr<Node> parse_alt() {
            auto alt = make(NodeKind::Alt);
            alt->kids.push_back(parse_concat());
            while (!eof() && peek() == '|') {
                ++pos_;
                alt->kids.push_back(parse_concat());
            }
            if (alt->kids.size() == 1) return std::move(alt->kids[0]);
            return alt;
        }

        std::unique_ptr<Node> parse_concat() {
            auto cat = make(NodeKind::Concat);
            while (!eof() && peek() != '|' && peek() != ')') {
                cat->kids.push_back(parse_rep());
            }
            if (cat->kids.empty()) return make(NodeKind::Empty);
            if (cat->kids.size() == 1) return std::move(cat->kids[0]);
            return cat;
        }

        std::unique_ptr<Node> parse_rep() {
            auto atom = parse_atom();
            if (eof()) return atom;
            char c = peek();
            int mn = -2, mx = -2;
            if (c == '*') {
                mn = 0;
                mx = -1;
                ++pos_;
            } else if (c == '+') {
                mn = 1;
                mx = -1;
                ++pos_;
            } else if (c == '?') {
                mn = 0;
                mx = 1;
                ++pos_;
            } else if (c == '{') {
                size_t save = pos_;
                ++pos_;
                int lo = parse_int();
                if (lo < 0) {
                    pos_ = save;  // '{' not a quantifier here; treat literally
                    return atom;
                }
                mn = lo;
                if (!eof() && peek() == ',') {
                    ++pos_;
                    if (!eof() && peek() == '}') {
                        mx = -1;
                    } else {
                        mx = parse_int();
                        if (mx < mn) fail("bad repetition range");
                    }
                } else {
                    mx = mn;
                }
                if (eof() || take() != '}') fail("expected '}'");
            } else {
                return atom;
            }
            if (atom->kind == NodeKind::WordBoundary || atom->kind == NodeKind::Bol ||
                atom->kind == NodeKind::Eol || atom->kind == NodeKind::Behind ||
                atom->kind == NodeKind::BehindNeg)
                fail("quantifier on assertion");
            if (mn > 64 || (mx > 64)) fail("repetition count too large");
            auto rep = make(NodeKind::Rep);
            rep->rep_min = mn;
            rep->rep_max = mx;
            rep->kids.push_back(std::move(atom));
            return rep;
        }

        int parse_int() {
            if (eof() || peek() < '0' || peek() > '9') return -1;
            int v = 0;
            while (!eof() && peek() >= '0' && peek() <= '9') {
                v = v * 10 + (take() - '0');
                if (v > 9999) fail("repetition count too large");
            }
            return v;
        }

        static void add_escape_class(ByteSet& s, char c, bool& handled) {
            handled = true;
            auto add_range = [&s](unsigned char a, unsigned char b) {
                for (int x = a; x <= b; ++x) s.set(static_cast<size_t>(x));
            };
            switch (c) {
                case 'd': add_range('0', '9'); break;
                case 'w':
                    add_range('a', 'z');
                    add_range('A', 'Z');
                    add_range('0', '9');
                    s.set('_');
                    break;
                case 's':
                    s.set(' ');
                    s.set('\t');
                    s.set('\n');
                    s.set('\r');
                    s.set('\f');
                    s.set('\v');
                    break;
                default: handled = false;
            }
        }

        ByteSet escape_set(char c) {
            ByteSet s;
            bool handled = false;
            add_escape_class(s, c, handled);
            if (handled) return s;
            if (c == 'D' || c == 'W' || c == 'S') {
                ByteSet inner;
                add_escape_class(inner, static_cast<char>(c - 'A' + 'a'), handled);
                return ~inner;
            }
            switch (c) {
                case 'n': s.set('\n'); return s;
                case 't': s.set('\t'); return s;
                case 'r': s.set('\r'); return s;
                default: break;
            }
            if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'))
                fail(std::string("unsupported escape \\") + c);
            s.set(static_cast<unsigned char>(c));
            return s;
        }

        std::unique_ptr<Node> parse_atom() {
            char c = take();
            if (c == '(') {
                if (pos_ + 1 < p_.size() && p_[pos_] == '?' && p_[pos_ + 1] == '<') {
                    pos_ += 2;
                    char mode = take();
                    if (mode != '=' && mode != '!') fail("expected (?<= or (?<!");
                    auto n = make(mode == '=' ? NodeKind::Behind : NodeKind::BehindNeg);
                    char a = take();
                    if (a == '\\') {
                        n->cls = escape_set(take());
                    } else if (a == '[') {
                        auto cls = parse_class();
                        n->cls = cls->cls;
                    } else {
                        n->cls.set(static_cast<unsigned char>(a));
                    }
                    if (eof() || take() != ')') fail("lookbehind must contain one element");
                    return n;
                }
                auto inner = parse_alt();
                if (eof() || take() != ')') fail("expected ')'");
                return inner;
            }
            if (c == '[') return parse_class();
            if (c == '.') {
                auto n = make(NodeKind::Chars);
                n->cls = ~ByteSet{};
                n->cls.reset('\n');
                return n;
            }
            if (c == '^') return make(NodeKind::Bol);
            if (c == '$') return make(NodeKind::Eol);
            if (c == '\\') {
                char e = take();
                if (e == 'b') return make(NodeKind::WordBoundary);
                auto n = make(NodeKind::Chars);
                n->cls = escape_set(e);
                return n;
            }
            if (c == '*' || c == '+' || c == '?' || c == ')') fail("misplaced metacharacter");
            auto n = make(NodeKind::Chars);
            n->cls.set(static_cast<unsigned char>(c));
            return n;
        }

        std::unique_ptr<Node> parse_class() {
            auto n = make(NodeKind::Chars);
            bool negate = false;
            if (!eof() && peek() == '^') {
                negate = true;
                ++pos_;
            }
            bool first = true;
            while (true) {
                if (eof()) fail("unterminated class");
                char c = take();
                if (c == ']' && !first) break;
                first = false;
                ByteSet item;
                if (c == '\\') {
                    item = escape_set(take());
                    n->cls |= item;
                    continue;
                }
                // range?
                if (!eof() && peek() == '-' && pos_ + 1 < p_.size() && p_[pos_ + 1] != ']') {
                    ++pos_;
                    char hi = take();
                    if (hi == '\\') hi = take();
                    if (static_cast<unsigned char>(hi) < static_cast<unsigned char>(c))
                        fail("inverted class range");
                    for (int x = static_cast<unsigned char>(c);
                         x <= static_cast<unsigned char>(hi); ++x)
                        n->cls.set(static_cast<size_t>(x));
                } else {
                    n->cls.set(static_cast<unsigned char>(c));
                }
            }
            if (negate) n->cls = ~n->cls;
            return n;
        }
    };

    // --- Thompson construction ----------------------------------------------
    struct Frag {
        int start;
        std::vector<std::pair<int, int>> out;  // (state, slot 1|2) dangling arrows
    };

    int add_state(State s) {
        states_.push_back(std::move(s));
        return static_cast<int>(states_.size() - 1);
    }

    void patch(const std::vector<std::pair<int, int>>& out, int target) {
        for (auto [s, slot] : out) {
            if (slot == 1)
                states_[static_cast<size_t>(s)].next1 = target;
            else
                states_[static_cast<size_t>(s)].next2 = target;
        }
    }

    Frag compile(const Node& n) {
        switch (n.kind) {
            case NodeKind::Chars: {
                int s = add_state(State{Kind::Char, std::make_shared<ByteSet>(n.cls), -1, -1});
                return {s, {{s, 1}}};
            }
            case NodeKind::WordBoundary: {
                int s = add_state(State{Kind::WordBoundary, {}, -1, -1});
                return {s, {{s, 1}}};
            }
            case NodeKind::Bol: {
                int s = add_state(State{Kind::Bol, {}, -1, -1});
                return {s, {{s, 1}}};
            }
            case NodeKind::Eol: {
                int s = add_state(State{Kind::Eol, {}, -1, -1});
                return {s, {{s, 1}}};
            }
            case NodeKind::Behind: {
                int s = add_state(State{Kind::Behind, std::make_shared<ByteSet>(n.cls), -1, -1});
                return {s, {{s, 1}}};
            }
            case NodeKind::BehindNeg: {
                int s =
                    add_state(State{Kind::BehindNeg, std::make_shared<ByteSet>(n.cls), -1, -1});
                return {s, {{s, 1}}};
            }
            case NodeKind::Empty: {
                int s = add_state(State{Kind::Split, {}, -1, -1});
                return {s, {{s, 1}, {s, 2}}};  // both arrows forward: pure epsilon
            }
            case NodeKind::Concat: {
                Frag acc = compile(*n.kids[0]);
                for (size_t i = 1; i < n.kids.size(); ++i) {
                    Frag next = compile(*n.kids[i]);
                    patch(acc.out, next.start);
                    acc.out = std::move(next.out);
                }
                return acc;
            }
            case NodeKind::Alt: {
                Frag acc = compile(*n.kids[0]);
                for (size_t i = 1; i < n.kids.size(); ++i) {
                    Frag rhs = compile(*n.kids[i]);
                    int split = add_state(State{Kind::Split, {}, acc.start, rhs.start});
                    acc.start = split;
                    for (auto& o : rhs.out) acc.out.push_back(o);
                }
                return acc;
            }
            case NodeKind::Rep: return compile_rep(n);
        }
        throw UsageError("regex internal error");
    }

    Frag compile_rep(const Node& n) {
        const Node& child = *n.kids[0];
        int mn = n.rep_min;
        int mx = n.rep_max;
        if (mn == 0 && mx == -1) {  // X*
            int split = add_state(State{Kind::Split, {}, -1, -1});
            Frag body = compile(child);
            states_[static_cast<size_t>(split)].next1 = body.start;
            patch(body.out, split);
            return {split, {{split, 2}}};
        }
        if (mn == 1 && mx == -1) {  // X+
            Frag body = compile(child);
            int split = add_state(State{Kind::Split, {}, body.start, -1});
            patch(body.out, split);
            return {body.start, {{split, 2}}};
        }
        if (mn == 0 && mx == 1) {  // X?
            Frag body = compile(child);
            int split = add_state(State{Kind::Split, {}, body.start, -1});
            Frag f{split, std::move(body.out)};
            f.out.push_back({split, 2});
            return f;
        }
        // {m,n} / {m,} expand into clones.
        std::vector<std::unique_ptr<Node>> parts;
        for (int i = 0; i < mn; ++i) parts.push_back(child.clone());
        if (mx == -1) {
            auto star = std::make_unique<Node>();
            star->kind = NodeKind::Rep;
            star->rep_min = 0;
            star->rep_max = -1;
            star->kids.push_back(child.clone());
            parts.push_back(std::move(star));
        } else {
            for (int i = mn; i < mx; ++i) {
                auto opt = std::make_unique<Node>();
                opt->kind = NodeKind::Rep;
                opt->rep_min = 0;
                opt->rep_max = 1;
                opt->kids.push_back(child.clone());
                parts.push_back(std::move(opt));
            }
        }
        if (parts.empty()) {
            Node empty;
            empty.kind = NodeKind::Empty;
            return compile(empty);
        }
        Node cat;
        cat.kind = NodeKind::Concat;
        cat.kids = std::move(parts);
        return compile(cat);
    }

    // --- simulation -----------------------------------------------------------
    struct SimState {
        explicit SimState(size_t n) : stamps(n, 0) {}
        std::vector<int> current, next;
        std::vector<uint32_t> stamps;
        uint32_t stamp_value = 1;
        bool contains_accept = false;
    };

    static bool is_word_byte(unsigned char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
               c == '_';
    }

    static bool boundary_at(std::string_view text, size_t pos) {
        bool left = pos > 0 && is_word_byte(static_cast<unsigned char>(text[pos - 1]));
        bool right = pos < text.size() && is_word_byte(static_cast<unsigned char>(text[pos]));
        return left != right;
    }

    void add_closure(std::vector<int>& list, int s, std::string_view text, size_t pos,
                     SimState& sim) const {
        if (s < 0) return;
        if (sim.stamps[static_cast<size_t>(s)] == sim.stamp_value) return;
        sim.stamps[static_cast<size_t>(s)] = sim.stamp_value;
        const State& st = states_[static_cast<size_t>(s)];
        switch (st.kind) {
            case Kind::Char: list.push_back(s); return;
            case Kind::Accept: sim.contains_accept = true; return;
            case Kind::Split:
                add_closure(list, st.next1, text, pos, sim);
                add_closure(list, st.next2, text, pos, sim);
                return;
            case Kind::WordBoundary:
                if (boundary_at(text, pos)) add_closure(list, st.next1, text, pos, sim);
                return;
            case Kind::Bol:
                if (pos == 0) add_closure(list, st.next1, text, pos, sim);
                return;
            case Kind::Eol:
                if (pos == text.size()) add_closure(list, st.next1, text, pos, sim);
                return;
            case Kind::Behind:
                if (pos > 0 && st.cls->test(static_cast<unsigned char>(text[pos - 1])))
                    add_closure(list, st.next1, text, pos, sim);
                return;
            case Kind::BehindNeg:
                if (pos == 0 || !st.cls->test(static_cast<unsigned char>(text[pos - 1])))
                    add_closure(list, st.next1, text, pos, sim);
                return;
        }
    }

    // Union of bytes that can consume the first character, traversing
    // assertions optimistically. Any non-empty match must start with one of
    // these bytes, so the scan loop skips other positions in O(1).
    void compute_first_bytes() {
        std::vector<char> seen(states_.size(), 0);
        std::vector<int> stack{start_};
        while (!stack.empty()) {
            int s = stack.back();
            stack.pop_back();
            if (s < 0 || seen[static_cast<size_t>(s)]) continue;
            seen[static_cast<size_t>(s)] = 1;
            const State& st = states_[static_cast<size_t>(s)];
            switch (st.kind) {
                case Kind::Char: first_bytes_ |= *st.cls; break;
                case Kind::Split:
                    stack.push_back(st.next1);
                    stack.push_back(st.next2);
                    break;
                case Kind::WordBoundary:
                case Kind::Bol:
                case Kind::Eol:
                case Kind::Behind:
                case Kind::BehindNeg: stack.push_back(st.next1); break;
                case Kind::Accept: break;
            }
        }
    }

    std::string pattern_;
    std::vector<State> states_;
    int start_ = -1;
    int accept_ = -1;
    ByteSet first_bytes_;
};

}  // namespace rtdlog
