"""Two control knobs beyond the mean-squared error target: the
worst-case (sup-norm) setting, and the decoder Lipschitz bound.

A tighter Lipschitz bound forces more coordinates into the encoder
(larger n) but certifies a more robust decoder.
"""

from cpnrom import FitConfig, decoder_lipschitz_check, evaluate, fit_adaptive, gen_kdv

train, test, _ = gen_kdv()
geom = train.geometry()

print("worst-case setting (error measured in the sup norm):")
model, _ = fit_adaptive(train, FitConfig(epsilon=1e-1, setting="wc"), geom)
m_test = evaluate(model, test, geom)
print(f"  n = {model.n}, N = {model.N}, "
      f"RE_inf train {model.achieved.re:.3e}, test {m_test.re:.3e}")

print("\ndecoder stability at a mean-squared target of 1e-4:")
for lip in (2.0, 100.0):
    model, _ = fit_adaptive(train, FitConfig(epsilon=1e-4, lipschitz=lip), geom)
    cert, emp = decoder_lipschitz_check(model, train.states)
    print(f"  L = {lip:>5}: n = {model.n:2d}, certificate {cert:6.2f}, "
          f"empirical {emp:6.2f}, RE_train {model.achieved.re:.2e}")
