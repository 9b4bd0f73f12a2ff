#include <set>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace krds;

namespace {

const Ontology toy({"d1", "d2"}, {"s1", "s2", "s3"});

SemanticFrame frame_with(std::size_t s, SlotStatus v) {
    SemanticFrame f;
    f.intent = intent_for(v);
    f.slots[s] = v;
    return f;
}

} // namespace

TEST(Actions, IndexRoundTrip) {
    for (std::size_t i = 0; i < toy.num_actions(); ++i) EXPECT_EQ(action_index(action_at(i, toy), toy), i);
    EXPECT_EQ(action_at(0, toy).kind, ActionKind::thanks);
    EXPECT_EQ(action_at(1, toy).kind, ActionKind::closing);
    EXPECT_EQ(action_at(3, toy), AgentAction::inform(1));
    EXPECT_EQ(action_at(6, toy), AgentAction::request(2));
}

TEST(Actions, TableListsEveryAction) {
    std::ostringstream os;
    write_action_table(os, toy);
    EXPECT_EQ(os.str(), "index\tkind\tidentifier\n"
                        "0\tthanks\tthanks\n1\tclosing\tclosing\n"
                        "2\tinform_disease\td1\n3\tinform_disease\td2\n"
                        "4\trequest_symptom\ts1\n5\trequest_symptom\ts2\n6\trequest_symptom\ts3\n");
}

TEST(Tracker, PendingRequestWithoutSlotBecomesNotSure) {
    auto st = after_agent(DialogueState::initial(toy), AgentAction::request(1));
    const auto v = update_symptoms(st, SemanticFrame{UserIntent::request_disease, {}, std::nullopt});
    EXPECT_EQ(v, (SymptomVector{0, -2, 0}));
}

TEST(Tracker, SlotSetsEntryAndLeavesOthers) {
    auto st = DialogueState::initial(toy);
    st.symptoms = {0, -1, -2};
    EXPECT_EQ(update_symptoms(st, frame_with(0, SlotStatus::yes)), (SymptomVector{1, -1, -2}));
}

TEST(Tracker, EmptyFrameIsIdentity) {
    auto st = DialogueState::initial(toy);
    st.symptoms = {1, 0, -2};
    EXPECT_EQ(update_symptoms(st, SemanticFrame{}), st.symptoms);
}

TEST(Tracker, IdempotentAndLatestWins) {
    auto st = DialogueState::initial(toy);
    const auto f = frame_with(2, SlotStatus::not_sure);
    const auto once = after_user(st, f);
    EXPECT_EQ(after_user(once, f), once);
    const auto flipped = after_user(after_user(st, frame_with(0, SlotStatus::yes)), frame_with(0, SlotStatus::no));
    EXPECT_EQ(flipped.symptoms[0], -1.0);
}

TEST(Encoding, FreshStateDimensionAndTurnBit) {
    const Vector v = encode_state(DialogueState::initial(toy), toy, 4);
    ASSERT_EQ(v.size(), 20);
    EXPECT_EQ(v.sum(), 1.0);
    EXPECT_EQ(v(3 + 7 + 5), 1.0);
}

TEST(Encoding, SymptomIsFedRaw) {
    auto st = DialogueState::initial(toy);
    st.symptoms[0] = 1.0;
    EXPECT_EQ(encode_state(st, toy, 4)(0), 1.0);
    st.symptoms[0] = -2.0;
    EXPECT_EQ(encode_state(st, toy, 4)(0), -2.0);
}

TEST(Encoding, LargeConfigDimension) {
    std::vector<std::string> dis, sym;
    for (int i = 0; i < 4; ++i) dis.push_back("d" + std::to_string(i));
    for (int i = 0; i < 66; ++i) sym.push_back("s" + std::to_string(i));
    const Ontology o(dis, sym);
    ASSERT_EQ(o.num_actions(), 72u);
    EXPECT_EQ(state_dim(o, 22), 166u);
}

TEST(Encoding, TurnOutsideRangeThrows) {
    auto st = DialogueState::initial(toy);
    st.turn = 5;
    EXPECT_THROW(encode_state(st, toy, 4), Error);
}

TEST(Encoding, InjectiveOverSmallStateSpace) {
    const Ontology o({"d"}, {"a", "b"});
    const double alphabet[] = {1, -1, -2, 0};
    std::set<std::vector<double>> seen;
    std::size_t count = 0;
    for (double x : alphabet)
        for (double y : alphabet)
            for (std::size_t agent = 0; agent <= o.num_actions(); ++agent)
                for (std::size_t user = 0; user <= kNumUserIntents; ++user)
                    for (int turn = 0; turn <= 2; ++turn) {
                        DialogueState st = DialogueState::initial(o);
                        st.symptoms = {x, y};
                        if (agent < o.num_actions()) st.prev_agent = action_at(agent, o);
                        if (user < kNumUserIntents) st.prev_user = static_cast<UserIntent>(user);
                        st.turn = turn;
                        const Vector v = encode_state(st, o, 2);
                        seen.insert(std::vector<double>(v.data(), v.data() + v.size()));
                        ++count;
                    }
    EXPECT_EQ(seen.size(), count);
}

TEST(Mask, KnownSymptomNeverSelected) {
    SymptomVector s{1, 0, 0};
    Vector q = Vector::Zero(7);
    q(4) = 100.0;
    const Vector masked = mask_actions(q, s, toy);
    EXPECT_NE(masked_argmax(masked, allowed_actions(s, toy)), 4u);
    Eigen::Index best;
    masked.maxCoeff(&best);
    EXPECT_NE(best, 4);
}

TEST(Mask, UnknownSymptomsLeaveQUnchanged) {
    Vector q = Vector::LinSpaced(7, -3, 3);
    EXPECT_EQ(mask_actions(q, SymptomVector{0, 0, 0}, toy), q);
}

TEST(Mask, AllKnownLeavesGreetingsAndInforms) {
    const double alphabet[] = {1, -1, -2};
    for (double v : alphabet) {
        SymptomVector s{v, v, v};
        const auto ok = allowed_actions(s, toy);
        for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(ok[i], i < 4) << i;
    }
}
