#include <map>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "support.hpp"

using namespace krds;

namespace {

// d1, d2 over fever, cough, rash, vomiting.
struct Fixture {
    Ontology o{{"d1", "d2"}, {"fever", "cough", "rash", "vomiting"}};
    UserGoal goal;
    Fixture() {
        goal.disease = 0;
        goal.explicit_symptoms[3] = true;
        goal.implicit_symptoms[0] = true;
        goal.implicit_symptoms[1] = false;
    }
};

} // namespace

TEST(RewardSchemes, Presets) {
    EXPECT_EQ(reward_scheme("main"), (RewardScheme{"main", 44, -22, -1}));
    EXPECT_EQ(reward_scheme("R1"), (RewardScheme{"R1", 22, -11, -1}));
    EXPECT_EQ(reward_scheme("R2"), (RewardScheme{"R2", 11, -6, -1}));
    EXPECT_EQ(reward_scheme("R1*"), (RewardScheme{"R1*", 22, -11, -0.5}));
    EXPECT_EQ(reward_scheme("R2*"), (RewardScheme{"R2*", 11, -6, -0.25}));
    EXPECT_DOUBLE_EQ(unit_reward_scheme().miss_penalty * 22.0, -1.0);
    EXPECT_THROW(reward_scheme("R3"), Error);
}

TEST(RewardSchemes, Triple) {
    EXPECT_EQ(parse_reward_triple("10,-5,-0.5"), (RewardScheme{"custom", 10, -5, -0.5}));
    EXPECT_THROW(parse_reward_triple("10,-5"), Error);
    EXPECT_THROW(parse_reward_triple("10,x,-1"), Error);
    EXPECT_THROW(parse_reward_triple("-1,-5,-1"), Error);
}

TEST(InitialFrame, DisclosesExplicitSymptoms) {
    Fixture f;
    const auto fr = initial_frame(f.goal);
    EXPECT_EQ(fr.intent, UserIntent::request_disease);
    EXPECT_EQ(fr.slots, (std::map<std::size_t, SlotStatus>{{3, SlotStatus::yes}}));
    EXPECT_TRUE(initial_frame(UserGoal{}).slots.empty());
}

TEST(Respond, CorrectInformSucceeds) {
    Fixture f;
    SimSession s{f.goal};
    const auto r = respond(s, AgentAction::inform(0), main_reward_scheme());
    EXPECT_TRUE(r.terminal);
    EXPECT_EQ(r.reward, 44.0);
    EXPECT_EQ(*s.outcome, Outcome::success);
    EXPECT_FALSE(r.frame);
}

TEST(Respond, WrongInformAndClosingFail) {
    Fixture f;
    SimSession s{f.goal};
    EXPECT_EQ(respond(s, AgentAction::inform(1), main_reward_scheme()).reward, -22.0);
    EXPECT_EQ(*s.outcome, Outcome::fail_wrong_disease);
    SimSession c{f.goal};
    EXPECT_EQ(respond(c, AgentAction{ActionKind::closing, 0}, main_reward_scheme()).reward, -22.0);
    EXPECT_THROW(respond(c, AgentAction::inform(0), main_reward_scheme()), Error);
}

TEST(Respond, RequestAnswers) {
    Fixture f;
    const auto r1 = reward_scheme("R1");
    SimSession s{f.goal};
    auto yes = respond(s, AgentAction::request(0), r1);
    EXPECT_EQ(yes.frame->intent, UserIntent::confirm_symptom);
    EXPECT_EQ(yes.reward, 0.0);
    EXPECT_TRUE(yes.hit);
    auto no = respond(s, AgentAction::request(1), r1);
    EXPECT_EQ(no.frame->intent, UserIntent::deny_symptom);
    EXPECT_EQ(no.frame->slots.at(1), SlotStatus::no);
    EXPECT_EQ(no.reward, 0.0);
    auto absent = respond(s, AgentAction::request(2), r1);
    EXPECT_EQ(absent.frame->intent, UserIntent::not_sure_symptom);
    EXPECT_EQ(absent.frame->slots.at(2), SlotStatus::not_sure);
    EXPECT_EQ(absent.reward, -1.0);
    EXPECT_FALSE(absent.hit);
    EXPECT_EQ(s.turn, 3);
    EXPECT_FALSE(s.done);
}

TEST(Respond, DeniedSymptomPenaltyIsOptional) {
    Fixture f;
    SimSession s{f.goal};
    EXPECT_EQ(respond(s, AgentAction::request(1), reward_scheme("R1"), {22, true}).reward, -1.0);
}

TEST(Respond, ThanksKeepsDialogueGoing) {
    Fixture f;
    SimSession s{f.goal};
    const auto r = respond(s, AgentAction{ActionKind::thanks, 0}, main_reward_scheme());
    EXPECT_EQ(r.reward, 0.0);
    EXPECT_FALSE(r.terminal);
    EXPECT_EQ(r.frame->intent, UserIntent::request_disease);
}

TEST(Respond, TurnLimitFails) {
    Fixture f;
    SimSession s{f.goal};
    SimulatorOptions opts{3, false};
    respond(s, AgentAction{ActionKind::thanks, 0}, main_reward_scheme(), opts);
    respond(s, AgentAction{ActionKind::thanks, 0}, main_reward_scheme(), opts);
    const auto r = respond(s, AgentAction{ActionKind::thanks, 0}, main_reward_scheme(), opts);
    EXPECT_TRUE(r.terminal);
    EXPECT_EQ(r.reward, -22.0);
    EXPECT_EQ(*s.outcome, Outcome::fail_max_turns);
}

TEST(SampleGoal, SingletonAndUniform) {
    std::mt19937_64 rng(4);
    std::vector<UserGoal> one(1);
    one[0].disease = 7;
    for (int i = 0; i < 20; ++i) EXPECT_EQ(sample_goal<std::mt19937_64>(one, rng).disease, 7u);

    std::vector<UserGoal> goals(6);
    for (std::size_t i = 0; i < goals.size(); ++i) goals[i].disease = i;
    std::vector<double> counts(6, 0.0);
    for (int i = 0; i < 12000; ++i) counts[sample_goal<std::mt19937_64>(goals, rng).disease] += 1.0;
    double stat = 0.0;
    for (double c : counts) stat += (c - 2000.0) * (c - 2000.0) / 2000.0;
    EXPECT_GT(boost::math::cdf(boost::math::complement(boost::math::chi_squared(5.0), stat)), 0.001);
    EXPECT_THROW(sample_goal<std::mt19937_64>(std::span<const UserGoal>{}, rng), Error);
}
