#pragma once

// Chess rules engine used to adjudicate model-generated games.
//
// Positions are immutable values: every operation that "plays" a move
// returns a new Position. Board layout is a 64-entry mailbox with a1 = 0,
// h1 = 7, a8 = 56.

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mdbench::chess {

enum class Color : std::uint8_t { white, black };

constexpr Color opposite(Color c) { return c == Color::white ? Color::black : Color::white; }

enum class PieceType : std::uint8_t { none, pawn, knight, bishop, rook, queen, king };

struct Piece {
    PieceType type = PieceType::none;
    Color color = Color::white;

    constexpr bool empty() const { return type == PieceType::none; }
    constexpr bool is(PieceType t, Color c) const { return type == t && color == c; }
    bool operator==(const Piece&) const = default;
};

struct Square {
    std::uint8_t index = 0;

    constexpr Square() = default;
    constexpr explicit Square(int i) : index(static_cast<std::uint8_t>(i)) {}
    static constexpr Square at(int file, int rank) { return Square(rank * 8 + file); }

    constexpr int file() const { return index & 7; }
    constexpr int rank() const { return index >> 3; }

    /// Parses "e4"-style names; nullopt for anything else.
    static std::optional<Square> parse(std::string_view name);
    std::string name() const;

    auto operator<=>(const Square&) const = default;
};

enum class CastleSide : std::uint8_t { none, king_side, queen_side };

struct Move {
    Square from;
    Square to;
    PieceType promotion = PieceType::none;
    // Derived flags, filled in by the move generator. Not part of identity.
    bool capture = false;
    bool en_passant = false;
    CastleSide castle = CastleSide::none;

    /// UCI long algebraic, e.g. "e2e4", "e7e8q", "e1g1".
    std::string uci() const;

    bool operator==(const Move& o) const {
        return from == o.from && to == o.to && promotion == o.promotion;
    }
    std::strong_ordering operator<=>(const Move& o) const {
        if (auto c = from <=> o.from; c != 0) return c;
        if (auto c = to <=> o.to; c != 0) return c;
        return promotion <=> o.promotion;
    }
};

enum class Outcome : std::uint8_t { white_win, black_win, draw };

enum class TerminationCause : std::uint8_t {
    checkmate,
    stalemate,
    insufficient_material,
    fifty_move,
    threefold_repetition,
};

struct GameTermination {
    Outcome kind;
    TerminationCause cause;

    /// "1-0", "0-1" or "1/2-1/2".
    std::string_view token() const;
    bool operator==(const GameTermination&) const = default;
};

std::string_view to_string(TerminationCause cause);

enum class ChessErrc {
    invalid_fen,
    not_a_san_token,
    illegal_in_position,
    ambiguous,
    move_not_legal,
    depth_too_large,
};

class ChessError : public std::runtime_error {
public:
    ChessError(ChessErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ChessErrc code() const noexcept { return code_; }

private:
    ChessErrc code_;
};

// Castling right bits.
inline constexpr std::uint8_t kWhiteKingSide = 1;
inline constexpr std::uint8_t kWhiteQueenSide = 2;
inline constexpr std::uint8_t kBlackKingSide = 4;
inline constexpr std::uint8_t kBlackQueenSide = 8;

class Position {
public:
    static Position initial();
    /// Standard 6-field FEN. Throws ChessError(invalid_fen).
    static Position from_fen(std::string_view fen);

    std::string fen() const;

    Piece piece_at(Square sq) const { return board_[sq.index]; }
    Color side_to_move() const { return side_; }
    std::uint8_t castling_rights() const { return castling_; }
    std::optional<Square> en_passant() const { return ep_; }
    int halfmove_clock() const { return halfmove_; }
    int fullmove_number() const { return fullmove_; }
    std::uint64_t hash() const { return hash_; }

    /// Occurrences of the current position since the last irreversible move,
    /// including the current one.
    int repetition_count() const;

    bool in_check() const;
    bool is_attacked(Square sq, Color by) const;
    std::optional<Square> king_square(Color c) const;

    bool operator==(const Position& o) const;

private:
    friend class MoveGen;
    friend Position apply_move(const Position&, const Move&);
    friend std::string format_san(const Position&, const Move&);

    void recompute_hash();
    Position play_unchecked(const Move& m) const;

    std::array<Piece, 64> board_{};
    Color side_ = Color::white;
    std::uint8_t castling_ = 0;
    std::optional<Square> ep_;
    int halfmove_ = 0;
    int fullmove_ = 1;
    std::uint64_t hash_ = 0;
    std::vector<std::uint64_t> history_;
};

Position initial_position();

/// All legal moves, sorted by (origin, destination, promotion).
std::vector<Move> legal_moves(const Position& p);

/// Throws ChessError(move_not_legal) if `m` is not legal in `p`.
Position apply_move(const Position& p, const Move& m);

/// Resolves a SAN token against the legal moves of `p`. Annotation suffixes
/// (+ # ! ?) are ignored. Throws ChessError with not_a_san_token,
/// illegal_in_position or ambiguous.
Move parse_san(const Position& p, std::string_view token);

/// Minimal-disambiguation SAN with check/mate suffix.
std::string format_san(const Position& p, const Move& m);

/// Parses UCI long algebraic and resolves it against the legal moves.
Move parse_uci(const Position& p, std::string_view text);

std::optional<GameTermination> terminal_state(const Position& p);

bool insufficient_material(const Position& p);

/// Leaf count of the legal move tree. Depth is limited to 6.
std::uint64_t perft(const Position& p, int depth);

}  // namespace mdbench::chess
