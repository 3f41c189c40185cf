"""Walk through diverse query sampling on a small hand-made corpus.

Run with ``python demos/sampler_walkthrough.py``. Prints which queries each
domain contributes, the pass in which they were accepted and which keywords
blocked the rest.
"""

from deepsearch_data.corpus import AnnotatedQuery, QaRecord, count_interrogatives
from deepsearch_data.sampler import SamplePlan, sample_with_report

ROWS = [
    ("f1", "film", "Who directed the film and when was it released?", ["film", "director"]),
    ("f2", "film", "Which film won the award?", ["film", "award"]),
    ("f3", "film", "Where was the movie shot and who starred in it?", ["location", "cast"]),
    ("f4", "film", "Who composed the score?", ["music"]),
    ("g1", "geography", "Which river is longer, and where does each one start?", ["river", "length"]),
    ("g2", "geography", "What is the capital of the country where the river ends?", ["river", "capital"]),
    ("g3", "geography", "How high is the mountain?", ["mountain"]),
    ("m1", "music", "Who wrote the song and when?", ["song", "songwriter"]),
]


def main():
    dataset = [AnnotatedQuery(QaRecord(qid, question, ("x",), "demo"), domain, tuple(kws),
                              count_interrogatives(question))
               for qid, domain, question, kws in ROWS]
    n = 9
    plan = SamplePlan.for_dataset(dataset, n)
    print(f"{len(dataset)} queries over {len(plan.domains)} domains; n={n}, per-domain quota={plan.per_domain_quota}\n")

    chosen, report = sample_with_report(dataset, n)
    for q, (domain, pass_no) in zip(chosen, report.acceptance):
        print(f"  {q.id:3} {domain:10} pass {pass_no}  wh={q.interrogative_count}  keywords={list(q.keywords)}")

    # g2 shares "river" with g1, so it only gets in once the keyword set resets for pass 1;
    # f2 shares "film" with f1 and the film quota is already full by then
    print("\nreport:", report.to_dict())


if __name__ == "__main__":
    main()
