#!/usr/bin/env python3
"""Regenerates fixtures/dataset.json, fixtures/fig1_cases.json and
fixtures/withheld_requirements.json from the scenario templates below."""

import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

# Each fact establishes the statute clause at the same index.
SCENARIOS = {
    "substance_use": {
        "question_type": "eligibility",
        "label": "ineligible",
        "intro": "{n} worked as a forklift operator at a distribution warehouse for three years.",
        "facts": [
            "During a shift on March 4 a supervisor saw {n} using methamphetamine on the warehouse premises during working hours.",
            "{n} had no prescription from a licensed practitioner for methamphetamine.",
            "The handbook {n} signed at hire contained a written drug and alcohol policy.",
            "A certified laboratory performed a confirmatory test on the urine sample from {n} and reported a positive result.",
            "{n} was discharged the next day because of the positive test result.",
        ],
        "clauses": [
            "the claimant used or was under the influence of a controlled substance on the employer's premises or during working hours;",
            "the substance was not prescribed to the claimant by a licensed practitioner;",
            "the employer maintained a written drug and alcohol policy communicated to the claimant before the incident;",
            "a confirmatory test was performed by a certified laboratory;",
            "the claimant was discharged as a result of the test result.",
        ],
        "question": "Question: Is {n} eligible for unemployment benefits?",
    },
    "pay_reduction_quit": {
        "question_type": "eligibility",
        "label": "eligible",
        "intro": "{n} was a line cook at a downtown restaurant.",
        "facts": [
            "In June the restaurant owner reduced the hourly rate for {n} from 20 dollars to 14 dollars.",
            "The cut amounted to thirty percent of the prior rate of pay.",
            "{n} quit eleven days after the reduction took effect.",
        ],
        "clauses": [
            "the employer reduced the claimant's hourly rate or salary after hire;",
            "the reduction exceeded twenty percent of the claimant's prior rate of pay;",
            "the claimant quit within thirty days after the reduction took effect.",
        ],
        "question": "Question: Is {n} eligible for unemployment benefits?",
    },
    "unsafe_condition_quit": {
        "question_type": "eligibility",
        "label": "eligible",
        "intro": "{n} assembled circuit boards in a small electronics plant.",
        "facts": [
            "{n} notified the plant manager in writing about the unsafe solder fumes before quitting.",
            "Management had six weeks to correct the ventilation and failed to repair it.",
            "A physician stated that the fumes posed a risk to the lungs and health of {n}.",
        ],
        "clauses": [
            "the claimant notified the employer of the unsafe condition before quitting;",
            "the employer had a reasonable opportunity to correct the condition and failed to do so;",
            "the condition posed a risk to the claimant's health or safety.",
        ],
        "question": "Question: Is {n} eligible for unemployment benefits?",
    },
    "rule_violation": {
        "question_type": "eligibility",
        "label": "ineligible",
        "intro": "{n} operated a stamping press at a metal fabrication shop.",
        "facts": [
            "{n} violated the written rule of conduct that prohibits disabling machine guards.",
            "{n} signed a safety acknowledgment describing the rule and knew of the rule before the violation.",
            "The violation was deliberate: {n} removed the guard on purpose to speed up production.",
        ],
        "clauses": [
            "the claimant violated a written rule of conduct established by the employer;",
            "the claimant knew of the rule before the violation;",
            "the violation was deliberate rather than accidental.",
        ],
        "question": "Question: Is {n} eligible for unemployment benefits after being discharged for a rule violation?",
    },
    "availability": {
        "question_type": "direct",
        "label": "yes",
        "intro": "{n} filed a weekly certification after a bookkeeping job ended.",
        "facts": [
            "{n} is physically able to accept full-time employment as a bookkeeper.",
            "{n} makes four job contacts each week through the state job portal.",
            "{n} has no restriction on hours and can take any shift.",
        ],
        "clauses": [
            "the claimant is physically able to accept full-time employment;",
            "the claimant makes at least three job contacts each week;",
            "the claimant has no restriction on hours that prevents accepting suitable employment.",
        ],
        "question": "Question: Is {n} available for work this week?",
    },
    "lack_of_work": {
        "question_type": "eligibility",
        "label": "eligible",
        "intro": "{n} decorated cakes at a neighborhood bakery.",
        "facts": [
            "The bakery eliminated the position held by {n} because of a reduction in business after the holidays.",
            "The separation was initiated by the bakery owner.",
            "{n} earned wages in all four quarters of the base period.",
        ],
        "clauses": [
            "the position was eliminated because of a reduction in business;",
            "the separation was initiated by the employing unit;",
            "the claimant earned wages in at least two quarters of the base period.",
        ],
        "question": "Question: Is {n} eligible for unemployment benefits?",
    },
}

# (case id, scenario, name, withheld fact indexes)
CASES = [
    ("c01", "substance_use", "Dana Reyes", []),
    ("c02", "pay_reduction_quit", "Sam Okafor", []),
    ("c03", "unsafe_condition_quit", "Priya Nair", []),
    ("c04", "rule_violation", "Leo Brandt", []),
    ("c05", "availability", "Maria Lopez", []),
    ("c06", "lack_of_work", "Omar Haddad", []),
    ("c07", "substance_use", "Jordan Kim", []),
    ("c08", "availability", "Tomas Silva", []),
    ("c09", "pay_reduction_quit", "Alicia Grant", []),
    ("m1-01", "substance_use", "Kim Adler", [1]),
    ("m1-02", "unsafe_condition_quit", "Noah Fischer", [0]),
    ("m1-03", "availability", "Ruth Oyelaran", [1]),
    ("m2-01", "pay_reduction_quit", "Grace Liu", [1, 2]),
    ("m2-02", "rule_violation", "Ivan Petrov", [0, 1]),
    ("m2-03", "lack_of_work", "Lena Novak", [0, 2]),
    ("m3-01", "substance_use", "Ben Carter", [0, 2, 3]),
    ("m3-02", "rule_violation", "Chloe Martin", [0, 1, 2]),
    ("m3-03", "availability", "Yusuf Demir", [0, 1, 2]),
    ("m4-01", "substance_use", "Aria Costa", [0, 1, 2, 4]),
    ("m4-02", "substance_use", "Felix Wagner", [1, 2, 3, 4]),
]


def build(case_id, scenario, name, withheld):
    s = SCENARIOS[scenario]
    facts = [f.format(n=name) for f in s["facts"]]
    kept = [f for i, f in enumerate(facts) if i not in withheld]
    narrative = " ".join([s["intro"].format(n=name), *kept, s["question"].format(n=name)])
    case = {
        "id": case_id,
        "narrative": narrative,
        "question_type": s["question_type"],
        "issue_tags": [scenario],
        "_meta": {
            "gold_label": "inconclusive" if withheld else s["label"],
            "completeness": f"missing-{len(withheld)}" if withheld else "complete",
            "withheld_facts": [facts[i] for i in withheld],
        },
    }
    requirements = [s["clauses"][i].rstrip(";.") for i in withheld]
    return case, requirements


def write(path, doc):
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n")


def main():
    cases, expected = [], {}
    for spec in CASES:
        case, requirements = build(*spec)
        cases.append(case)
        expected[case["id"]] = requirements
    fig1 = []
    for spec in [("five-complete", "substance_use", "Casey Morgan", [])] + [
        (f"five-minus-{i + 1}", "substance_use", "Casey Morgan", [i]) for i in range(5)
    ]:
        case, requirements = build(*spec)
        fig1.append(case)
        expected[case["id"]] = requirements
    write(ROOT / "dataset.json", cases)
    write(ROOT / "fig1_cases.json", fig1)
    write(ROOT / "withheld_requirements.json", expected)


if __name__ == "__main__":
    main()
