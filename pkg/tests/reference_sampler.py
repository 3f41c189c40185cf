"""Independent, deliberately literal reference execution of the greedy sampler.

Written line by line from the pseudo-code (domain clusters, descending
interrogative sort, passes that reset the keyword set) without sharing any
code with the library. Used as the oracle for equivalence tests.
"""

import math


def reference_sample(dataset, n):
    domains = []
    for x in dataset:
        if x.domain not in domains:
            domains.append(x.domain)
    if not domains:
        return []
    n_d = math.ceil(n / len(domains))
    selected = []
    selected_ids = set()
    for d in domains:
        cluster = [x for x in dataset if x.domain == d]
        # insertion sort keeps ties in input order, independent of sorted()
        ordered = []
        for x in cluster:
            pos = len(ordered)
            while pos > 0 and ordered[pos - 1].interrogative_count < x.interrogative_count:
                pos -= 1
            ordered.insert(pos, x)
        cluster = ordered
        s_d = []
        while len(s_d) < n_d and cluster:
            keyword_set = set()
            for x in list(cluster):
                if len(s_d) >= n_d:
                    break
                if x.id in selected_ids:
                    cluster.remove(x)  # never selectable again
                    continue
                kw = set(x.keywords)
                if not (kw & keyword_set):
                    s_d.append(x)
                    selected_ids.add(x.id)
                    keyword_set |= kw
                    cluster.remove(x)
        selected.extend(s_d)
    return selected[:n]
