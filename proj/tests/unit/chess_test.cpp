#include "mdbench/chess.hpp"

#include "support/games.hpp"

#include <gtest/gtest.h>

#include <algorithm>

namespace mdbench::chess {
namespace {

using testing::play;

// Node counts below were produced by python-chess 1.11 (an independent move
// generator) and frozen here.
constexpr const char* kKiwipete = "r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1";
constexpr const char* kEndgame = "8/2p5/3p4/KP5r/1R3p1k/8/4P1P1/8 w - - 0 1";
constexpr const char* kPromotions = "r3k2r/Pppp1ppp/1b3nbN/nP6/BBP1P3/q4N2/Pp1P2PP/R2Q1RK1 w kq - 0 1";
constexpr const char* kTricky = "rnbq1k1r/pp1Pbppp/2p5/8/2B5/8/PPP1NnPP/RNBQK2R w KQ - 1 8";

Move uci(const Position& p, const char* text) { return parse_uci(p, text); }

TEST(InitialPosition, Basics) {
    const Position p = initial_position();
    int pieces = 0;
    for (int i = 0; i < 64; ++i) pieces += !p.piece_at(Square(i)).empty();
    EXPECT_EQ(pieces, 32);
    EXPECT_EQ(p.side_to_move(), Color::white);
    EXPECT_EQ(p.halfmove_clock(), 0);
    EXPECT_EQ(p.fullmove_number(), 1);
    EXPECT_EQ(p.castling_rights(), 15);
    EXPECT_EQ(legal_moves(p).size(), 20u);
    EXPECT_EQ(p.fen(), "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1");
}

TEST(LegalMoves, SortedByOriginDestinationPromotion) {
    for (const char* fen : {kKiwipete, kPromotions, kTricky}) {
        const auto moves = legal_moves(Position::from_fen(fen));
        EXPECT_TRUE(std::is_sorted(moves.begin(), moves.end())) << fen;
    }
}

TEST(LegalMoves, StalemateIsEmpty) {
    const Position p = Position::from_fen("7k/5Q2/6K1/8/8/8/8/8 b - - 0 1");
    EXPECT_TRUE(legal_moves(p).empty());
    const auto t = terminal_state(p);
    ASSERT_TRUE(t);
    EXPECT_EQ(t->kind, Outcome::draw);
    EXPECT_EQ(t->cause, TerminationCause::stalemate);
    EXPECT_EQ(t->token(), "1/2-1/2");
}

TEST(Perft, InitialPosition) {
    const Position p = initial_position();
    EXPECT_EQ(perft(p, 0), 1u);
    EXPECT_EQ(perft(p, 1), 20u);
    EXPECT_EQ(perft(p, 2), 400u);
    EXPECT_EQ(perft(p, 3), 8902u);
}

TEST(Perft, TacticalPositions) {
    EXPECT_EQ(perft(Position::from_fen(kKiwipete), 1), 48u);
    EXPECT_EQ(perft(Position::from_fen(kKiwipete), 2), 2039u);
    EXPECT_EQ(perft(Position::from_fen(kKiwipete), 3), 97862u);
    EXPECT_EQ(perft(Position::from_fen(kEndgame), 4), 43238u);
    EXPECT_EQ(perft(Position::from_fen(kPromotions), 3), 9467u);
    EXPECT_EQ(perft(Position::from_fen(kTricky), 3), 62379u);
}

TEST(Perft, DepthGuard) {
    try {
        perft(initial_position(), 7);
        FAIL() << "expected depth-too-large";
    } catch (const ChessError& e) {
        EXPECT_EQ(e.code(), ChessErrc::depth_too_large);
    }
}

TEST(Fen, RoundTripAndValidation) {
    for (const char* fen : {kKiwipete, kEndgame, kPromotions, kTricky}) EXPECT_EQ(Position::from_fen(fen).fen(), fen);
    for (const char* bad : {"", "8/8/8/8/8/8/8/8 w - - 0 1", "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR x KQkq - 0 1",
                            "4k3/8/8/8/8/8/8/4K2R w K e4 0 1", "4k3/4R3/8/8/8/8/8/4K3 w - - 0 1",
                            "P3k3/8/8/8/8/8/8/4K3 w - - 0 1"}) {
        try {
            Position::from_fen(bad);
            ADD_FAILURE() << "accepted " << bad;
        } catch (const ChessError& e) {
            EXPECT_EQ(e.code(), ChessErrc::invalid_fen) << bad;
        }
    }
}

TEST(San, ParseBasics) {
    const Position p = initial_position();
    EXPECT_EQ(parse_san(p, "e4").uci(), "e2e4");
    EXPECT_EQ(parse_san(p, "Nf3").uci(), "g1f3");
    EXPECT_EQ(parse_san(p, "Nf3!?").uci(), "g1f3");
    EXPECT_EQ(parse_san(p, "e4+").uci(), "e2e4");
}

TEST(San, KingBlockedIsIllegal) {
    try {
        parse_san(initial_position(), "Ke2");
        FAIL();
    } catch (const ChessError& e) {
        EXPECT_EQ(e.code(), ChessErrc::illegal_in_position);
    }
}

TEST(San, NotSanTokens) {
    for (const char* tok : {"", "hello", "Zf3", "e9", "def", "x", "Nf", "Pe4e5", "O-O-O-O"}) {
        try {
            parse_san(initial_position(), tok);
            ADD_FAILURE() << "accepted " << tok;
        } catch (const ChessError& e) {
            EXPECT_EQ(e.code(), ChessErrc::not_a_san_token) << tok;
        }
    }
}

TEST(San, RuyLopezMoreau) {
    // 1.e4 e5 2.Nf3 Nc6 3.Bb5 a6, checked against python-chess.
    const Position p = play({"e4", "e5", "Nf3", "Nc6", "Bb5"});
    EXPECT_EQ(p.fen(), "r1bqkbnr/pppp1ppp/2n5/1B2p3/4P3/5N2/PPPP1PPP/RNBQK2R b KQkq - 3 3");
    EXPECT_EQ(parse_san(p, "a6").uci(), "a7a6");
}

TEST(San, Ambiguity) {
    // Both rooks can reach d1.
    const Position p = Position::from_fen("4k3/8/8/8/8/8/4K3/R6R w - - 0 1");
    EXPECT_EQ(format_san(p, uci(p, "a1d1")), "Rad1");
    EXPECT_EQ(format_san(p, uci(p, "h1h5")), "Rh5");
    try {
        parse_san(p, "Rd1");
        FAIL();
    } catch (const ChessError& e) {
        EXPECT_EQ(e.code(), ChessErrc::ambiguous);
    }
    const Position q = Position::from_fen("4k3/8/8/8/R7/8/8/R3K3 w - - 0 1");
    EXPECT_EQ(format_san(q, uci(q, "a1a2")), "R1a2");
    const Position queens = Position::from_fen("4k3/8/8/8/8/Q1Q5/8/Q3K3 w - - 0 1");
    EXPECT_EQ(format_san(queens, uci(queens, "a1b2")), "Q1b2");
    const Position corner = Position::from_fen("4k3/8/8/8/8/Q7/4K3/Q1Q5 w - - 0 1");
    EXPECT_EQ(format_san(corner, uci(corner, "a1b2")), "Qa1b2");
}

TEST(San, CastlingPromotionEnPassant) {
    const Position c = Position::from_fen("r3k2r/8/8/8/8/8/8/R3K2R w KQkq - 0 1");
    EXPECT_EQ(format_san(c, uci(c, "e1g1")), "O-O");
    EXPECT_EQ(format_san(c, uci(c, "e1c1")), "O-O-O");
    EXPECT_EQ(parse_san(c, "0-0").uci(), "e1g1");

    const Position promo = Position::from_fen("1n5k/P7/8/8/8/8/8/4K3 w - - 0 1");
    EXPECT_EQ(format_san(promo, uci(promo, "a7a8q")), "a8=Q");
    EXPECT_EQ(format_san(promo, uci(promo, "a7b8r")), "axb8=R+");
    EXPECT_EQ(parse_san(promo, "axb8=N").uci(), "a7b8n");
    EXPECT_EQ(parse_san(promo, "a8Q").uci(), "a7a8q");
    EXPECT_THROW(parse_san(promo, "a8"), ChessError);

    const Position ep = play({"e4", "a6", "e5", "d5"});
    EXPECT_EQ(ep.en_passant()->name(), "d6");
    const Move m = parse_san(ep, "exd6");
    EXPECT_TRUE(m.en_passant);
    const Position after = apply_move(ep, m);
    EXPECT_TRUE(after.piece_at(*Square::parse("d5")).empty());
    EXPECT_EQ(format_san(ep, m), "exd6");
}

TEST(ApplyMove, ClocksAndEnPassantSquare) {
    const Position start = initial_position();
    const Position p = apply_move(start, uci(start, "e2e4"));
    EXPECT_EQ(p.side_to_move(), Color::black);
    ASSERT_TRUE(p.en_passant());
    EXPECT_EQ(p.en_passant()->name(), "e3");
    EXPECT_EQ(p.halfmove_clock(), 0);

    const Position q = play({"Nf3", "Nf6"});
    EXPECT_EQ(q.halfmove_clock(), 2);
    EXPECT_EQ(q.fullmove_number(), 2);

    const Position before_capture = play({"e4", "d5"});
    const Position capture = apply_move(before_capture, parse_san(before_capture, "exd5"));
    EXPECT_EQ(capture.halfmove_clock(), 0);
}

TEST(ApplyMove, RejectsIllegalAndKeepsInput) {
    const Position p = initial_position();
    const Position copy = p;
    EXPECT_THROW(apply_move(p, Move{*Square::parse("e1"), *Square::parse("e2")}), ChessError);
    (void)apply_move(p, uci(p, "g1f3"));
    EXPECT_EQ(p, copy);
}

TEST(ApplyMove, CastlingRightsUpdates) {
    const Position p = Position::from_fen("r3k2r/8/8/8/8/8/8/R3K2R w KQkq - 0 1");
    const Position rook_moved = apply_move(p, uci(p, "h1h5"));
    EXPECT_EQ(rook_moved.castling_rights(), kWhiteQueenSide | kBlackKingSide | kBlackQueenSide);
    const Position capture = apply_move(p, uci(p, "a1a8"));
    EXPECT_EQ(capture.castling_rights(), kWhiteKingSide | kBlackKingSide);
    const Position castled = apply_move(p, uci(p, "e1g1"));
    EXPECT_TRUE(castled.piece_at(*Square::parse("f1")).is(PieceType::rook, Color::white));
    EXPECT_EQ(castled.castling_rights(), kBlackKingSide | kBlackQueenSide);
}

TEST(Castling, ThroughCheckIsIllegal) {
    const Position p = Position::from_fen("4k3/8/8/8/8/8/5r2/R3K2R w KQ - 0 1");
    // The f2 rook covers f1.
    const auto moves = legal_moves(p);
    auto has = [&](const char* u) {
        return std::any_of(moves.begin(), moves.end(), [&](const Move& m) { return m.uci() == u; });
    };
    EXPECT_FALSE(has("e1g1"));
    EXPECT_TRUE(has("e1c1"));
}

TEST(Terminal, FoolsMate) {
    const Position p = play({"f3", "e5", "g4", "Qh4#"});
    const auto t = terminal_state(p);
    ASSERT_TRUE(t);
    EXPECT_EQ(t->kind, Outcome::black_win);
    EXPECT_EQ(t->cause, TerminationCause::checkmate);
    EXPECT_EQ(t->token(), "0-1");
    EXPECT_FALSE(terminal_state(initial_position()));
}

TEST(Terminal, KnightShuffleThreefold) {
    Position p = initial_position();
    const char* shuffle[] = {"Nf3", "Nf6", "Ng1", "Ng8", "Nf3", "Nf6", "Ng1", "Ng8"};
    for (int i = 0; i < 8; ++i) {
        EXPECT_FALSE(terminal_state(p)) << "ply " << i;
        p = apply_move(p, parse_san(p, shuffle[i]));
    }
    EXPECT_EQ(p.repetition_count(), 3);
    const auto t = terminal_state(p);
    ASSERT_TRUE(t);
    EXPECT_EQ(t->cause, TerminationCause::threefold_repetition);
    EXPECT_EQ(t->kind, Outcome::draw);
}

TEST(Terminal, InsufficientMaterial) {
    auto cause = [](const char* fen) { return terminal_state(Position::from_fen(fen)); };
    EXPECT_EQ(cause("4k3/8/8/8/8/8/8/4K3 w - - 0 1")->cause, TerminationCause::insufficient_material);
    EXPECT_TRUE(cause("4k3/8/8/8/8/8/8/2B1K3 w - - 0 1"));
    EXPECT_TRUE(cause("4k3/8/8/8/8/8/8/1N2K3 b - - 0 1"));
    // Same-colored bishops (c1 and f8 are both dark).
    EXPECT_TRUE(cause("4kb2/8/8/8/8/8/8/2B1K3 w - - 0 1"));
    // Opposite-colored bishops can still mate in theory.
    EXPECT_FALSE(cause("4k1b1/8/8/8/8/8/8/2B1K3 w - - 0 1"));
    EXPECT_FALSE(cause("4k3/8/8/8/8/8/8/1NN1K3 w - - 0 1"));
    EXPECT_FALSE(cause("4k3/8/8/8/8/8/P7/4K3 w - - 0 1"));
}

TEST(Terminal, FiftyMove) {
    const auto t = terminal_state(Position::from_fen("4k3/8/8/8/8/8/8/R3K3 w - - 100 80"));
    ASSERT_TRUE(t);
    EXPECT_EQ(t->cause, TerminationCause::fifty_move);
    EXPECT_FALSE(terminal_state(Position::from_fen("4k3/8/8/8/8/8/8/R3K3 w - - 99 80")));
}

TEST(Properties, RandomPlayouts) {
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        for (const Position& p : testing::random_playout_positions(seed, 120)) {
            const auto moves = legal_moves(p);
            const auto term = terminal_state(p);
            if (term) {
                EXPECT_TRUE(moves.empty() || term->cause == TerminationCause::fifty_move ||
                            term->cause == TerminationCause::threefold_repetition ||
                            term->cause == TerminationCause::insufficient_material);
            }
            for (const Move& m : moves) {
                const Position copy = p;
                const Position next = apply_move(p, m);
                EXPECT_EQ(p, copy);
                // The mover's king is never left attacked.
                EXPECT_FALSE(next.is_attacked(*next.king_square(p.side_to_move()), next.side_to_move()));
                EXPECT_EQ(parse_san(p, format_san(p, m)), m);
                EXPECT_EQ(parse_uci(p, m.uci()), m);
            }
            // FEN round-trip preserves everything except the repetition history.
            EXPECT_EQ(Position::from_fen(p.fen()).fen(), p.fen());
        }
    }
}

}  // namespace
}  // namespace mdbench::chess
