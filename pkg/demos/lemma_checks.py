"""Scaling checks for the small-time estimates behind the contraction.

Runs the four smallness checks and the integral estimate on the shipped
band-limited corpus, then the negative control: for a constant function
the sup norm is not controlled by the H^{(1+r)/2} norm uniformly in T.
"""
from viscofree.norms import run_lemma_suite

rows, control = run_lemma_suite()
for name, rep in rows:
    print(name)
    for key in ("a", "b", "c", "d", "integral"):
        print("   ", rep[key].line())
print(control.line())
