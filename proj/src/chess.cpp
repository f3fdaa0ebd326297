#include "mdbench/chess.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace mdbench::chess {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct Zobrist {
    std::uint64_t piece[2][7][64]{};
    std::uint64_t black_to_move = 0;
    std::uint64_t castling[16]{};
    std::uint64_t ep_file[8]{};

    constexpr Zobrist() {
        std::uint64_t s = 0x6d6462656e6368ULL;
        for (auto& color : piece)
            for (auto& kind : color)
                for (auto& sq : kind) sq = splitmix64(s);
        black_to_move = splitmix64(s);
        for (auto& c : castling) c = splitmix64(s);
        for (auto& f : ep_file) f = splitmix64(s);
    }
};

constexpr Zobrist kZobrist{};

constexpr int kKnightSteps[8][2] = {{1, 2}, {2, 1}, {2, -1}, {1, -2}, {-1, -2}, {-2, -1}, {-2, 1}, {-1, 2}};
constexpr int kKingSteps[8][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
constexpr int kRookDirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
constexpr int kBishopDirs[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};

constexpr bool on_board(int file, int rank) { return file >= 0 && file < 8 && rank >= 0 && rank < 8; }

char piece_char(Piece p) {
    constexpr std::string_view letters = " pnbrqk";
    char c = letters[static_cast<int>(p.type)];
    return p.color == Color::white ? static_cast<char>(c - 'a' + 'A') : c;
}

std::optional<Piece> piece_from_char(char c) {
    Color color = (c >= 'A' && c <= 'Z') ? Color::white : Color::black;
    switch (c | 0x20) {
    case 'p': return Piece{PieceType::pawn, color};
    case 'n': return Piece{PieceType::knight, color};
    case 'b': return Piece{PieceType::bishop, color};
    case 'r': return Piece{PieceType::rook, color};
    case 'q': return Piece{PieceType::queen, color};
    case 'k': return Piece{PieceType::king, color};
    default: return std::nullopt;
    }
}

char san_letter(PieceType t) {
    switch (t) {
    case PieceType::knight: return 'N';
    case PieceType::bishop: return 'B';
    case PieceType::rook: return 'R';
    case PieceType::queen: return 'Q';
    case PieceType::king: return 'K';
    default: return '\0';
    }
}

std::optional<PieceType> piece_from_san_letter(char c) {
    switch (c) {
    case 'N': return PieceType::knight;
    case 'B': return PieceType::bishop;
    case 'R': return PieceType::rook;
    case 'Q': return PieceType::queen;
    case 'K': return PieceType::king;
    default: return std::nullopt;
    }
}

std::uint8_t rights_lost_at(Square sq) {
    switch (sq.index) {
    case 0: return kWhiteQueenSide;
    case 7: return kWhiteKingSide;
    case 4: return kWhiteKingSide | kWhiteQueenSide;
    case 56: return kBlackQueenSide;
    case 63: return kBlackKingSide;
    case 60: return kBlackKingSide | kBlackQueenSide;
    default: return 0;
    }
}

[[noreturn]] void fen_error(std::string_view fen, const std::string& why) {
    throw ChessError(ChessErrc::invalid_fen, "invalid FEN '" + std::string(fen) + "': " + why);
}

}  // namespace

std::optional<Square> Square::parse(std::string_view name) {
    if (name.size() != 2) return std::nullopt;
    const int file = name[0] - 'a';
    const int rank = name[1] - '1';
    if (!on_board(file, rank)) return std::nullopt;
    return Square::at(file, rank);
}

std::string Square::name() const {
    return {static_cast<char>('a' + file()), static_cast<char>('1' + rank())};
}

std::string Move::uci() const {
    std::string s = from.name() + to.name();
    if (promotion != PieceType::none) s += static_cast<char>(san_letter(promotion) | 0x20);
    return s;
}

std::string_view GameTermination::token() const {
    switch (kind) {
    case Outcome::white_win: return "1-0";
    case Outcome::black_win: return "0-1";
    case Outcome::draw: return "1/2-1/2";
    }
    return "*";
}

std::string_view to_string(TerminationCause cause) {
    switch (cause) {
    case TerminationCause::checkmate: return "checkmate";
    case TerminationCause::stalemate: return "stalemate";
    case TerminationCause::insufficient_material: return "insufficient-material";
    case TerminationCause::fifty_move: return "fifty-move";
    case TerminationCause::threefold_repetition: return "threefold-repetition";
    }
    return "unknown";
}

bool square_attacked(const std::array<Piece, 64>& board, Square sq, Color by);

// Pseudo-legal generation plus the legality filter.
class MoveGen {
public:
    explicit MoveGen(const Position& p) : p_(p), us_(p.side_), them_(opposite(p.side_)) {}

    std::vector<Move> legal() const {
        std::vector<Move> out;
        out.reserve(48);
        pseudo(out);
        const auto king = p_.king_square(us_);
        std::erase_if(out, [&](const Move& m) { return !king || leaves_king_attacked(m, *king); });
        std::sort(out.begin(), out.end());
        return out;
    }

    // True when the side to move has a pawn placed to capture en passant.
    static bool ep_capturable(const std::array<Piece, 64>& board, Color side, Square ep) {
        const int dir = side == Color::white ? -1 : 1;
        const int rank = ep.rank() + dir;
        for (int df : {-1, 1}) {
            const int f = ep.file() + df;
            if (on_board(f, rank) && board[Square::at(f, rank).index].is(PieceType::pawn, side)) return true;
        }
        return false;
    }

    static std::uint64_t perft(const Position& p, int depth) {
        const auto moves = MoveGen(p).legal();
        if (depth == 1) return moves.size();
        std::uint64_t nodes = 0;
        for (const Move& m : moves) nodes += perft(p.play_unchecked(m), depth - 1);
        return nodes;
    }

private:
    bool leaves_king_attacked(const Move& m, Square king) const {
        std::array<Piece, 64> board = p_.board_;
        if (m.en_passant) board[Square::at(m.to.file(), m.from.rank()).index] = Piece{};
        board[m.to.index] = board[m.from.index];
        board[m.from.index] = Piece{};
        return square_attacked(board, m.from == king ? m.to : king, them_);
    }

    void add(std::vector<Move>& out, Square from, Square to, bool capture) const {
        out.push_back(Move{from, to, PieceType::none, capture});
    }

    void pseudo(std::vector<Move>& out) const {
        for (int i = 0; i < 64; ++i) {
            const Piece pc = p_.board_[i];
            if (pc.empty() || pc.color != us_) continue;
            const Square from(i);
            switch (pc.type) {
            case PieceType::pawn: pawn(out, from); break;
            case PieceType::knight: steps(out, from, kKnightSteps); break;
            case PieceType::bishop: slides(out, from, kBishopDirs); break;
            case PieceType::rook: slides(out, from, kRookDirs); break;
            case PieceType::queen:
                slides(out, from, kBishopDirs);
                slides(out, from, kRookDirs);
                break;
            case PieceType::king:
                steps(out, from, kKingSteps);
                castles(out, from);
                break;
            default: break;
            }
        }
    }

    void push_pawn(std::vector<Move>& out, Square from, Square to, bool capture) const {
        if (to.rank() == 0 || to.rank() == 7) {
            for (auto promo : {PieceType::knight, PieceType::bishop, PieceType::rook, PieceType::queen})
                out.push_back(Move{from, to, promo, capture});
        } else {
            add(out, from, to, capture);
        }
    }

    void pawn(std::vector<Move>& out, Square from) const {
        const int dir = us_ == Color::white ? 1 : -1;
        const int start_rank = us_ == Color::white ? 1 : 6;
        const int f = from.file();
        const int r = from.rank() + dir;
        if (!on_board(f, r)) return;
        const Square one = Square::at(f, r);
        if (p_.board_[one.index].empty()) {
            push_pawn(out, from, one, false);
            if (from.rank() == start_rank) {
                const Square two = Square::at(f, r + dir);
                if (p_.board_[two.index].empty()) add(out, from, two, false);
            }
        }
        for (int df : {-1, 1}) {
            if (!on_board(f + df, r)) continue;
            const Square to = Square::at(f + df, r);
            const Piece target = p_.board_[to.index];
            if (!target.empty() && target.color == them_) {
                push_pawn(out, from, to, true);
            } else if (p_.ep_ && *p_.ep_ == to) {
                out.push_back(Move{from, to, PieceType::none, true, true});
            }
        }
    }

    void steps(std::vector<Move>& out, Square from, const int (&deltas)[8][2]) const {
        for (const auto& d : deltas) {
            const int f = from.file() + d[0];
            const int r = from.rank() + d[1];
            if (!on_board(f, r)) continue;
            const Square to = Square::at(f, r);
            const Piece target = p_.board_[to.index];
            if (target.empty()) add(out, from, to, false);
            else if (target.color == them_) add(out, from, to, true);
        }
    }

    void slides(std::vector<Move>& out, Square from, const int (&dirs)[4][2]) const {
        for (const auto& d : dirs) {
            int f = from.file() + d[0];
            int r = from.rank() + d[1];
            while (on_board(f, r)) {
                const Square to = Square::at(f, r);
                const Piece target = p_.board_[to.index];
                if (target.empty()) {
                    add(out, from, to, false);
                } else {
                    if (target.color == them_) add(out, from, to, true);
                    break;
                }
                f += d[0];
                r += d[1];
            }
        }
    }

    void castles(std::vector<Move>& out, Square from) const {
        const int rank = us_ == Color::white ? 0 : 7;
        if (from != Square::at(4, rank) || p_.is_attacked(from, them_)) return;
        const std::uint8_t ks = us_ == Color::white ? kWhiteKingSide : kBlackKingSide;
        const std::uint8_t qs = us_ == Color::white ? kWhiteQueenSide : kBlackQueenSide;
        auto empty = [&](int file) { return p_.board_[Square::at(file, rank).index].empty(); };
        auto safe = [&](int file) { return !p_.is_attacked(Square::at(file, rank), them_); };
        auto rook_at = [&](int file) { return p_.board_[Square::at(file, rank).index].is(PieceType::rook, us_); };
        if ((p_.castling_ & ks) && rook_at(7) && empty(5) && empty(6) && safe(5) && safe(6)) {
            out.push_back(Move{from, Square::at(6, rank), PieceType::none, false, false, CastleSide::king_side});
        }
        if ((p_.castling_ & qs) && rook_at(0) && empty(1) && empty(2) && empty(3) && safe(3) && safe(2)) {
            out.push_back(Move{from, Square::at(2, rank), PieceType::none, false, false, CastleSide::queen_side});
        }
    }

    const Position& p_;
    Color us_;
    Color them_;
};

Position Position::initial() {
    return from_fen("rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1");
}

Position initial_position() { return Position::initial(); }

Position Position::from_fen(std::string_view fen) {
    std::istringstream in{std::string(fen)};
    std::string placement, side, castling, ep, half = "0", full = "1";
    if (!(in >> placement >> side >> castling >> ep)) fen_error(fen, "expected at least 4 fields");
    in >> half >> full;
    std::string extra;
    if (in >> extra) fen_error(fen, "trailing fields");

    Position p;
    int rank = 7, file = 0;
    for (char c : placement) {
        if (c == '/') {
            if (file != 8 || rank == 0) fen_error(fen, "bad rank layout");
            --rank;
            file = 0;
        } else if (c >= '1' && c <= '8') {
            file += c - '0';
            if (file > 8) fen_error(fen, "rank overflow");
        } else {
            auto piece = piece_from_char(c);
            if (!piece || file >= 8) fen_error(fen, std::string("bad piece '") + c + "'");
            if (piece->type == PieceType::pawn && (rank == 0 || rank == 7)) fen_error(fen, "pawn on back rank");
            p.board_[Square::at(file, rank).index] = *piece;
            ++file;
        }
    }
    if (rank != 0 || file != 8) fen_error(fen, "incomplete board");

    if (side == "w") p.side_ = Color::white;
    else if (side == "b") p.side_ = Color::black;
    else fen_error(fen, "bad side to move");

    if (castling != "-") {
        for (char c : castling) {
            switch (c) {
            case 'K': p.castling_ |= kWhiteKingSide; break;
            case 'Q': p.castling_ |= kWhiteQueenSide; break;
            case 'k': p.castling_ |= kBlackKingSide; break;
            case 'q': p.castling_ |= kBlackQueenSide; break;
            default: fen_error(fen, "bad castling field");
            }
        }
    }
    // Drop rights that the placement cannot support.
    auto has = [&](int idx, PieceType t, Color c) { return p.board_[idx].is(t, c); };
    if (!has(4, PieceType::king, Color::white)) p.castling_ &= ~(kWhiteKingSide | kWhiteQueenSide);
    if (!has(7, PieceType::rook, Color::white)) p.castling_ &= ~kWhiteKingSide;
    if (!has(0, PieceType::rook, Color::white)) p.castling_ &= ~kWhiteQueenSide;
    if (!has(60, PieceType::king, Color::black)) p.castling_ &= ~(kBlackKingSide | kBlackQueenSide);
    if (!has(63, PieceType::rook, Color::black)) p.castling_ &= ~kBlackKingSide;
    if (!has(56, PieceType::rook, Color::black)) p.castling_ &= ~kBlackQueenSide;

    if (ep != "-") {
        auto sq = Square::parse(ep);
        const int expected = p.side_ == Color::white ? 5 : 2;
        if (!sq || sq->rank() != expected) fen_error(fen, "bad en-passant square");
        p.ep_ = sq;
    }

    auto parse_int = [&](const std::string& s, int& out) {
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        if (ec != std::errc{} || ptr != s.data() + s.size()) fen_error(fen, "bad clock '" + s + "'");
    };
    parse_int(half, p.halfmove_);
    parse_int(full, p.fullmove_);
    if (p.halfmove_ < 0 || p.fullmove_ < 1) fen_error(fen, "clock out of range");

    int white_kings = 0, black_kings = 0;
    for (const Piece& pc : p.board_) {
        if (pc.is(PieceType::king, Color::white)) ++white_kings;
        if (pc.is(PieceType::king, Color::black)) ++black_kings;
    }
    if (white_kings != 1 || black_kings != 1) fen_error(fen, "need exactly one king per side");
    if (p.is_attacked(*p.king_square(opposite(p.side_)), p.side_)) fen_error(fen, "side not to move is in check");

    p.recompute_hash();
    return p;
}

std::string Position::fen() const {
    std::string out;
    for (int rank = 7; rank >= 0; --rank) {
        int gap = 0;
        for (int file = 0; file < 8; ++file) {
            const Piece pc = board_[Square::at(file, rank).index];
            if (pc.empty()) {
                ++gap;
                continue;
            }
            if (gap) out += static_cast<char>('0' + gap);
            gap = 0;
            out += piece_char(pc);
        }
        if (gap) out += static_cast<char>('0' + gap);
        if (rank) out += '/';
    }
    out += side_ == Color::white ? " w " : " b ";
    if (castling_ == 0) out += '-';
    if (castling_ & kWhiteKingSide) out += 'K';
    if (castling_ & kWhiteQueenSide) out += 'Q';
    if (castling_ & kBlackKingSide) out += 'k';
    if (castling_ & kBlackQueenSide) out += 'q';
    out += ' ';
    out += ep_ ? ep_->name() : "-";
    out += ' ' + std::to_string(halfmove_) + ' ' + std::to_string(fullmove_);
    return out;
}

void Position::recompute_hash() {
    std::uint64_t h = 0;
    for (int i = 0; i < 64; ++i) {
        const Piece pc = board_[i];
        if (!pc.empty()) h ^= kZobrist.piece[static_cast<int>(pc.color)][static_cast<int>(pc.type)][i];
    }
    if (side_ == Color::black) h ^= kZobrist.black_to_move;
    h ^= kZobrist.castling[castling_];
    // The en-passant square only distinguishes positions when a capture is possible.
    if (ep_ && MoveGen::ep_capturable(board_, side_, *ep_)) h ^= kZobrist.ep_file[ep_->file()];
    hash_ = h;
}

int Position::repetition_count() const {
    return 1 + static_cast<int>(std::count(history_.begin(), history_.end(), hash_));
}

std::optional<Square> Position::king_square(Color c) const {
    for (int i = 0; i < 64; ++i)
        if (board_[i].is(PieceType::king, c)) return Square(i);
    return std::nullopt;
}

bool Position::in_check() const {
    const auto k = king_square(side_);
    return k && is_attacked(*k, opposite(side_));
}

bool Position::is_attacked(Square sq, Color by) const { return square_attacked(board_, sq, by); }

bool square_attacked(const std::array<Piece, 64>& board, Square sq, Color by) {
    const int f = sq.file();
    const int r = sq.rank();
    // Pawns attack diagonally forward, so look one rank "behind" the target.
    const int pawn_rank = r + (by == Color::white ? -1 : 1);
    for (int df : {-1, 1}) {
        if (on_board(f + df, pawn_rank) && board[Square::at(f + df, pawn_rank).index].is(PieceType::pawn, by))
            return true;
    }
    for (const auto& d : kKnightSteps) {
        if (on_board(f + d[0], r + d[1]) && board[Square::at(f + d[0], r + d[1]).index].is(PieceType::knight, by))
            return true;
    }
    for (const auto& d : kKingSteps) {
        if (on_board(f + d[0], r + d[1]) && board[Square::at(f + d[0], r + d[1]).index].is(PieceType::king, by))
            return true;
    }
    auto ray = [&](const int (&dirs)[4][2], PieceType slider) {
        for (const auto& d : dirs) {
            int ff = f + d[0], rr = r + d[1];
            while (on_board(ff, rr)) {
                const Piece pc = board[Square::at(ff, rr).index];
                if (!pc.empty()) {
                    if (pc.color == by && (pc.type == slider || pc.type == PieceType::queen)) return true;
                    break;
                }
                ff += d[0];
                rr += d[1];
            }
        }
        return false;
    };
    return ray(kRookDirs, PieceType::rook) || ray(kBishopDirs, PieceType::bishop);
}

bool Position::operator==(const Position& o) const {
    return board_ == o.board_ && side_ == o.side_ && castling_ == o.castling_ && ep_ == o.ep_ &&
           halfmove_ == o.halfmove_ && fullmove_ == o.fullmove_ && history_ == o.history_;
}

Position Position::play_unchecked(const Move& m) const {
    Position next = *this;
    const Piece moving = board_[m.from.index];
    const Piece captured = board_[m.to.index];
    const bool pawn_move = moving.type == PieceType::pawn;
    bool capture = !captured.empty();

    next.board_[m.from.index] = Piece{};
    if (pawn_move && ep_ && m.to == *ep_ && m.from.file() != m.to.file() && captured.empty()) {
        next.board_[Square::at(m.to.file(), m.from.rank()).index] = Piece{};
        capture = true;
    }
    next.board_[m.to.index] = m.promotion != PieceType::none ? Piece{m.promotion, moving.color} : moving;

    if (moving.type == PieceType::king && std::abs(m.to.file() - m.from.file()) == 2) {
        const int rank = m.from.rank();
        const bool king_side = m.to.file() == 6;
        const Square rook_from = Square::at(king_side ? 7 : 0, rank);
        const Square rook_to = Square::at(king_side ? 5 : 3, rank);
        next.board_[rook_to.index] = next.board_[rook_from.index];
        next.board_[rook_from.index] = Piece{};
    }

    next.castling_ &= static_cast<std::uint8_t>(~(rights_lost_at(m.from) | rights_lost_at(m.to)));

    next.ep_.reset();
    if (pawn_move && std::abs(m.to.rank() - m.from.rank()) == 2)
        next.ep_ = Square::at(m.from.file(), (m.from.rank() + m.to.rank()) / 2);

    next.halfmove_ = (capture || pawn_move) ? 0 : halfmove_ + 1;
    if (side_ == Color::black) ++next.fullmove_;
    next.side_ = opposite(side_);

    if (capture || pawn_move) next.history_.clear();
    else next.history_.push_back(hash_);

    next.recompute_hash();
    return next;
}

std::vector<Move> legal_moves(const Position& p) { return MoveGen(p).legal(); }

Position apply_move(const Position& p, const Move& m) {
    const auto moves = legal_moves(p);
    if (std::find(moves.begin(), moves.end(), m) == moves.end())
        throw ChessError(ChessErrc::move_not_legal, "move " + m.uci() + " is not legal in " + p.fen());
    return p.play_unchecked(m);
}

Move parse_uci(const Position& p, std::string_view text) {
    if (text.size() < 4 || text.size() > 5)
        throw ChessError(ChessErrc::not_a_san_token, "not a UCI move: '" + std::string(text) + "'");
    const auto from = Square::parse(text.substr(0, 2));
    const auto to = Square::parse(text.substr(2, 2));
    PieceType promo = PieceType::none;
    bool bad_promo = false;
    if (text.size() == 5) {
        auto t = piece_from_san_letter(static_cast<char>(text[4] & ~0x20));
        bad_promo = !t || *t == PieceType::king;
        if (!bad_promo) promo = *t;
    }
    if (!from || !to || bad_promo) throw ChessError(ChessErrc::not_a_san_token, "not a UCI move: '" + std::string(text) + "'");
    for (const Move& m : legal_moves(p))
        if (m.from == *from && m.to == *to && m.promotion == promo) return m;
    throw ChessError(ChessErrc::illegal_in_position, "illegal move " + std::string(text) + " in " + p.fen());
}

namespace {

struct SanPattern {
    CastleSide castle = CastleSide::none;
    PieceType piece = PieceType::pawn;
    int from_file = -1;
    int from_rank = -1;
    Square to;
    bool capture = false;
    PieceType promotion = PieceType::none;
};

[[noreturn]] void not_san(std::string_view token) {
    throw ChessError(ChessErrc::not_a_san_token, "not a SAN token: '" + std::string(token) + "'");
}

std::string_view strip_annotations(std::string_view s) {
    while (!s.empty() && std::string_view("+#!?").find(s.back()) != std::string_view::npos) s.remove_suffix(1);
    if (s.size() > 4 && s.ends_with("e.p.")) s.remove_suffix(4);
    return s;
}

SanPattern lex_san(std::string_view token) {
    std::string_view s = strip_annotations(token);
    if (s.empty()) not_san(token);

    SanPattern pat;
    if (s == "O-O" || s == "0-0") {
        pat.castle = CastleSide::king_side;
        return pat;
    }
    if (s == "O-O-O" || s == "0-0-0") {
        pat.castle = CastleSide::queen_side;
        return pat;
    }

    // Promotion suffix: "=Q" or a bare trailing piece letter after a rank digit.
    if (s.size() >= 3) {
        if (s[s.size() - 2] == '=') {
            auto t = piece_from_san_letter(s.back());
            if (!t || *t == PieceType::king) not_san(token);
            pat.promotion = *t;
            s.remove_suffix(2);
        } else if (auto t = piece_from_san_letter(s.back());
                   t && *t != PieceType::king && s[s.size() - 2] >= '1' && s[s.size() - 2] <= '8') {
            pat.promotion = *t;
            s.remove_suffix(1);
        }
    }

    if (auto t = piece_from_san_letter(s.front())) {
        pat.piece = *t;
        s.remove_prefix(1);
    }
    if (s.size() < 2) not_san(token);
    auto target = Square::parse(s.substr(s.size() - 2));
    if (!target) not_san(token);
    pat.to = *target;
    s.remove_suffix(2);

    if (!s.empty() && (s.back() == 'x' || s.back() == ':')) {
        pat.capture = true;
        s.remove_suffix(1);
    }
    for (char c : s) {
        if (c >= 'a' && c <= 'h' && pat.from_file < 0 && pat.from_rank < 0) pat.from_file = c - 'a';
        else if (c >= '1' && c <= '8' && pat.from_rank < 0) pat.from_rank = c - '1';
        else not_san(token);
    }

    if (pat.piece == PieceType::pawn) {
        if (pat.from_rank >= 0) not_san(token);
        if (pat.capture && pat.from_file < 0) not_san(token);
        if (!pat.capture && pat.from_file >= 0 && pat.from_file != pat.to.file()) {
            // "ed5" style capture without the x.
            pat.capture = true;
        }
        if (pat.from_file < 0) pat.from_file = pat.to.file();
    } else if (pat.promotion != PieceType::none) {
        not_san(token);
    }
    return pat;
}

}  // namespace

Move parse_san(const Position& p, std::string_view token) {
    const SanPattern pat = lex_san(token);
    const auto moves = legal_moves(p);
    std::vector<Move> matches;
    for (const Move& m : moves) {
        const Piece pc = p.piece_at(m.from);
        if (pat.castle != CastleSide::none) {
            if (m.castle == pat.castle) matches.push_back(m);
            continue;
        }
        if (m.castle != CastleSide::none && pc.type == PieceType::king && pat.piece == PieceType::king) {
            // "Kg1" is not castling notation.
            continue;
        }
        if (pc.type != pat.piece || m.to != pat.to) continue;
        if (pat.from_file >= 0 && m.from.file() != pat.from_file) continue;
        if (pat.from_rank >= 0 && m.from.rank() != pat.from_rank) continue;
        if (pat.piece == PieceType::pawn && pat.capture != m.capture) continue;
        if (m.promotion != pat.promotion) continue;
        matches.push_back(m);
    }
    if (matches.empty())
        throw ChessError(ChessErrc::illegal_in_position,
                         "illegal move '" + std::string(token) + "' in " + p.fen());
    if (matches.size() > 1)
        throw ChessError(ChessErrc::ambiguous, "ambiguous move '" + std::string(token) + "' in " + p.fen());
    return matches.front();
}

std::string format_san(const Position& p, const Move& m) {
    const auto moves = legal_moves(p);
    auto it = std::find(moves.begin(), moves.end(), m);
    if (it == moves.end())
        throw ChessError(ChessErrc::move_not_legal, "move " + m.uci() + " is not legal in " + p.fen());
    const Move& mv = *it;
    const Piece pc = p.piece_at(mv.from);

    std::string san;
    if (mv.castle == CastleSide::king_side) {
        san = "O-O";
    } else if (mv.castle == CastleSide::queen_side) {
        san = "O-O-O";
    } else if (pc.type == PieceType::pawn) {
        if (mv.capture) {
            san += static_cast<char>('a' + mv.from.file());
            san += 'x';
        }
        san += mv.to.name();
        if (mv.promotion != PieceType::none) {
            san += '=';
            san += san_letter(mv.promotion);
        }
    } else {
        san += san_letter(pc.type);
        bool clash = false, same_file = false, same_rank = false;
        for (const Move& o : moves) {
            if (o == mv || o.to != mv.to || p.piece_at(o.from).type != pc.type) continue;
            clash = true;
            same_file |= o.from.file() == mv.from.file();
            same_rank |= o.from.rank() == mv.from.rank();
        }
        if (clash) {
            if (!same_file) san += static_cast<char>('a' + mv.from.file());
            else if (!same_rank) san += static_cast<char>('1' + mv.from.rank());
            else san += mv.from.name();
        }
        if (mv.capture) san += 'x';
        san += mv.to.name();
    }

    const Position next = p.play_unchecked(mv);
    if (next.in_check()) san += legal_moves(next).empty() ? '#' : '+';
    return san;
}

bool insufficient_material(const Position& p) {
    int minor_white = 0, minor_black = 0;
    std::vector<int> bishop_colors;
    bool knight = false;
    for (int i = 0; i < 64; ++i) {
        const Piece pc = p.piece_at(Square(i));
        switch (pc.type) {
        case PieceType::none:
        case PieceType::king: break;
        case PieceType::bishop:
            (pc.color == Color::white ? minor_white : minor_black)++;
            bishop_colors.push_back((Square(i).file() + Square(i).rank()) & 1);
            break;
        case PieceType::knight:
            (pc.color == Color::white ? minor_white : minor_black)++;
            knight = true;
            break;
        default: return false;
        }
    }
    const int minors = minor_white + minor_black;
    if (minors <= 1) return true;
    // K+B vs K+B with bishops on the same square color.
    return minors == 2 && !knight && minor_white == 1 && minor_black == 1 && bishop_colors[0] == bishop_colors[1];
}

std::optional<GameTermination> terminal_state(const Position& p) {
    if (legal_moves(p).empty()) {
        if (p.in_check()) {
            const Outcome winner = p.side_to_move() == Color::white ? Outcome::black_win : Outcome::white_win;
            return GameTermination{winner, TerminationCause::checkmate};
        }
        return GameTermination{Outcome::draw, TerminationCause::stalemate};
    }
    if (insufficient_material(p)) return GameTermination{Outcome::draw, TerminationCause::insufficient_material};
    if (p.halfmove_clock() >= 100) return GameTermination{Outcome::draw, TerminationCause::fifty_move};
    if (p.repetition_count() >= 3) return GameTermination{Outcome::draw, TerminationCause::threefold_repetition};
    return std::nullopt;
}

std::uint64_t perft(const Position& p, int depth) {
    if (depth < 0 || depth > 6)
        throw ChessError(ChessErrc::depth_too_large, "perft depth must be in [0, 6], got " + std::to_string(depth));
    if (depth == 0) return 1;
    return MoveGen::perft(p, depth);
}

}  // namespace mdbench::chess
