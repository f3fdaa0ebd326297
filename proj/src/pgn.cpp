#include "mdbench/pgn.hpp"

#include "mdbench/chess.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace mdbench::corpus {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

// Parses `[Name "Value"]`; nullopt on malformed input.
std::optional<std::pair<std::string, std::string>> parse_tag(std::string_view line) {
    std::size_t i = 1;
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t name_start = i;
    while (i < line.size() && !is_space(line[i]) && line[i] != '"' && line[i] != ']') ++i;
    std::string name(line.substr(name_start, i - name_start));
    while (i < line.size() && is_space(line[i])) ++i;
    if (name.empty() || i >= line.size() || line[i] != '"') return std::nullopt;
    ++i;
    std::string value;
    bool closed = false;
    for (; i < line.size(); ++i) {
        if (line[i] == '\\' && i + 1 < line.size()) {
            value += line[++i];
        } else if (line[i] == '"') {
            closed = true;
            ++i;
            break;
        } else {
            value += line[i];
        }
    }
    while (i < line.size() && is_space(line[i])) ++i;
    if (!closed || i >= line.size() || line[i] != ']') return std::nullopt;
    return std::make_pair(std::move(name), std::move(value));
}

bool is_annotation_only(std::string_view tok) {
    return !tok.empty() && std::all_of(tok.begin(), tok.end(), [](char c) { return c == '!' || c == '?'; });
}

struct MovetextState {
    bool in_brace = false;
    int variation_depth = 0;
    bool finished = false;
    bool error = false;
    std::string error_message;
};

void consume_token(std::string_view tok, MovetextState& st, PgnGame& game) {
    if (tok.empty() || st.variation_depth > 0) return;
    if (is_result_token(tok)) {
        game.result = std::string(tok);
        st.finished = true;
        return;
    }
    if (tok.front() == '$' || is_annotation_only(tok)) return;
    tok = strip_move_number(tok);
    if (tok.empty()) return;
    while (!tok.empty() && (tok.back() == '!' || tok.back() == '?')) tok.remove_suffix(1);
    if (tok.empty()) return;
    game.moves.emplace_back(tok);
}

void scan_movetext(std::string_view line, MovetextState& st, PgnGame& game) {
    std::string tok;
    auto flush = [&] {
        consume_token(tok, st, game);
        tok.clear();
    };
    for (std::size_t i = 0; i < line.size() && !st.finished; ++i) {
        const char c = line[i];
        if (st.in_brace) {
            if (c == '}') st.in_brace = false;
            continue;
        }
        switch (c) {
        case '{':
            flush();
            st.in_brace = true;
            break;
        case ';':
            flush();
            return;
        case '(':
            flush();
            ++st.variation_depth;
            break;
        case ')':
            flush();
            if (st.variation_depth == 0) {
                st.error = true;
                st.error_message = "unbalanced ')' in movetext";
            } else {
                --st.variation_depth;
            }
            break;
        default:
            if (is_space(c)) flush();
            else tok += c;
        }
    }
    if (!st.finished) flush();
}

}  // namespace

std::optional<std::string> PgnGame::tag(std::string_view name) const {
    for (const auto& [k, v] : tags)
        if (k == name) return v;
    return std::nullopt;
}

std::string_view strip_move_number(std::string_view tok) {
    std::size_t i = 0;
    while (i < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i]))) ++i;
    if (i == 0) return tok;
    std::size_t j = i;
    while (j < tok.size() && tok[j] == '.') ++j;
    if (j == i) return i == tok.size() ? std::string_view{} : tok;
    return tok.substr(j);
}

bool is_result_token(std::string_view token) {
    return token == "1-0" || token == "0-1" || token == "1/2-1/2" || token == "*";
}

PgnReader::PgnReader(std::istream& in, PgnReaderOptions options) : in_(in), options_(options) {}

bool PgnReader::read_line(std::string& line) {
    if (pending_) {
        line = std::move(*pending_);
        pending_.reset();
        return true;
    }
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

void PgnReader::skip(std::size_t start_line, std::string message) {
    ++skipped_;
    diagnostics_.push_back({game_index_, start_line, std::move(message)});
}

std::optional<PgnGame> PgnReader::next() {
    std::string line;
    for (;;) {
        // Skip blank lines and escape lines between games.
        bool have = false;
        while (read_line(line)) {
            auto first = std::find_if_not(line.begin(), line.end(), is_space);
            if (first == line.end() || *first == '%') continue;
            have = true;
            break;
        }
        if (!have) return std::nullopt;

        const std::size_t start_line = line_no_;
        PgnGame game;
        std::optional<std::string> error;

        while (!line.empty() && line.front() == '[') {
            if (auto tag = parse_tag(line)) game.tags.push_back(std::move(*tag));
            else if (!error) error = "malformed tag line " + std::to_string(line_no_);
            if (!read_line(line)) {
                line.clear();
                break;
            }
        }

        MovetextState st;
        bool eof = false;
        for (;;) {
            const bool fresh_game = !st.in_brace && !line.empty() && line.front() == '[';
            if (fresh_game) {
                pending_ = std::move(line);
                break;
            }
            if (line.empty() || line.front() != '%') scan_movetext(line, st, game);
            if (st.finished) break;
            if (!read_line(line)) {
                eof = true;
                break;
            }
        }

        if (st.error && !error) error = st.error_message;
        if (!st.finished && !error) {
            error = eof ? "unexpected end of stream before result token" : "missing result token";
        }
        if (!error && options_.validate) {
            if (auto why = replay_error(game)) error = *why;
        }
        if (error) {
            skip(start_line, *error);
            ++game_index_;
            continue;
        }
        if (options_.validate) {
            // Canonicalize to minimal SAN.
            chess::Position pos = game.tag("FEN") ? chess::Position::from_fen(*game.tag("FEN"))
                                                  : chess::initial_position();
            for (auto& san : game.moves) {
                const chess::Move m = chess::parse_san(pos, san);
                san = chess::format_san(pos, m);
                pos = chess::apply_move(pos, m);
            }
        }
        ++game_index_;
        ++yielded_;
        return game;
    }
}

std::vector<PgnGame> parse_pgn_stream(std::istream& in, PgnReaderOptions options,
                                      std::vector<PgnDiagnostic>* diagnostics) {
    PgnReader reader(in, options);
    std::vector<PgnGame> games;
    while (auto g = reader.next()) games.push_back(std::move(*g));
    if (diagnostics) *diagnostics = reader.diagnostics();
    return games;
}

std::optional<std::string> replay_error(const PgnGame& game) {
    try {
        chess::Position pos = game.tag("FEN") ? chess::Position::from_fen(*game.tag("FEN"))
                                              : chess::initial_position();
        for (std::size_t i = 0; i < game.moves.size(); ++i) {
            try {
                pos = chess::apply_move(pos, chess::parse_san(pos, game.moves[i]));
            } catch (const chess::ChessError& e) {
                return "ply " + std::to_string(i + 1) + ": " + e.what();
            }
        }
    } catch (const chess::ChessError& e) {
        return e.what();
    }
    return std::nullopt;
}

std::vector<PgnGame> filter_by_min_elo(std::vector<PgnGame> games, int min_elo) {
    auto elo_ok = [min_elo](const std::optional<std::string>& v) {
        if (!v || v->empty()) return false;
        int elo = 0;
        auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), elo);
        return ec == std::errc{} && ptr == v->data() + v->size() && elo >= min_elo;
    };
    std::erase_if(games, [&](const PgnGame& g) { return !(elo_ok(g.tag("WhiteElo")) && elo_ok(g.tag("BlackElo"))); });
    return games;
}

std::string to_pgn(const PgnGame& game) {
    std::string out;
    for (const auto& [k, v] : game.tags) {
        out += '[' + k + " \"";
        for (char c : v) {
            if (c == '"' || c == '\\') out += '\\';
            out += c;
        }
        out += "\"]\n";
    }
    if (!game.tags.empty()) out += '\n';

    int number = 1;
    bool black = false;
    if (auto fen = game.tag("FEN")) {
        const auto pos = chess::Position::from_fen(*fen);
        number = pos.fullmove_number();
        black = pos.side_to_move() == chess::Color::black;
    }
    std::string line;
    auto emit = [&](const std::string& word) {
        if (!line.empty() && line.size() + 1 + word.size() > 79) {
            out += line + '\n';
            line.clear();
        }
        if (!line.empty()) line += ' ';
        line += word;
    };
    for (std::size_t i = 0; i < game.moves.size(); ++i) {
        if (!black) emit(std::to_string(number) + '.');
        else if (i == 0) emit(std::to_string(number) + "...");
        emit(game.moves[i]);
        if (black) ++number;
        black = !black;
    }
    emit(game.result.empty() ? "*" : game.result);
    out += line + "\n\n";
    return out;
}

}  // namespace mdbench::corpus
