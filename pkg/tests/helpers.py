"""Independent oracles and model generators shared by the tests."""
import numpy as np
from scipy.stats import norm

from semimarkov import ObservationModel, SemiMarkovModel, SojournLaw


def random_kernel(rng, n):
    p = np.zeros((n, n))
    for i in range(n):
        w = rng.dirichlet(np.ones(n - 1))
        p[np.arange(n) != i, i] = w
    # exact unit column sums
    p /= p.sum(axis=0, keepdims=True)
    return p


def random_pmf(rng, length):
    pmf = rng.dirichlet(np.ones(length))
    pmf[-1] = max(pmf[-1], 1e-3)
    return pmf / pmf.sum()


def random_model(rng, n, max_support):
    laws = [SojournLaw(random_pmf(rng, int(rng.integers(1, max_support + 1)))) for _ in range(n)]
    return SemiMarkovModel(random_kernel(rng, n), laws, rng.dirichlet(np.ones(n)))


def random_obs(rng, n, spread=2.0, scale=(0.3, 1.0)):
    return ObservationModel(rng.uniform(-spread, spread, n), rng.uniform(*scale, n))


def geometric_model(rho, p, p0, support=400):
    laws = [SojournLaw.geometric(r, support) for r in rho]
    return SemiMarkovModel(p, laws, p0)


def markov_matrix(rho, p):
    """I + Pi diag(rho): the per-step transition matrix of an all-geometric chain."""
    p = np.asarray(p, dtype=float)
    A = p * np.asarray(rho)[None, :]
    np.fill_diagonal(A, 1.0 - np.asarray(rho))
    return A


def hmm_forward_backward(A, p0, c, d, y):
    """Scaled forward-backward for a Gaussian HMM with column-stochastic A.

    Returns filtered, smoothed marginals and the E-step sums: jump counts
    N[j, i], lagged sums G[f, i] = sum_{l>=1} f(y_l) P(X_{l-1}=i | y), and
    same-time sums H[f, i] = sum_{l>=0} f(y_l) P(X_l=i | y), f in (1, y, y^2).
    """
    y = np.asarray(y, dtype=float)
    T1, N = y.size, len(p0)
    E = norm.pdf(y[:, None], loc=np.asarray(c)[None, :], scale=np.asarray(d)[None, :])
    alpha = np.zeros((T1, N))
    scale = np.zeros(T1)
    a = np.asarray(p0) * E[0]
    scale[0] = a.sum()
    alpha[0] = a / scale[0]
    for t in range(1, T1):
        a = E[t] * (A @ alpha[t - 1])
        scale[t] = a.sum()
        alpha[t] = a / scale[t]
    beta = np.ones((T1, N))
    for t in range(T1 - 2, -1, -1):
        beta[t] = A.T @ (E[t + 1] * beta[t + 1]) / scale[t + 1]
    post = alpha * beta
    post /= post.sum(axis=1, keepdims=True)
    Ncount = np.zeros((N, N))
    for t in range(1, T1):
        xi = (E[t] * beta[t])[:, None] * A * alpha[t - 1][None, :] / scale[t]
        Ncount += xi
    np.fill_diagonal(Ncount, 0.0)
    fv = np.stack([np.ones_like(y), y, y * y])  # (3, T1)
    G = fv[:, 1:] @ post[:-1]
    H = fv @ post
    return {"filtered": alpha, "smoothed": post, "N": Ncount, "J": G[0], "G": G, "H": H,
            "loglik": float(np.log(scale).sum())}


def brute_force_smoother(model, obs, y):
    """Full-path enumeration written out step by step, no vectorization."""
    import itertools

    N = model.n_states
    T1 = len(y)
    filt = np.zeros((T1, N))
    smooth = np.zeros((T1, N))
    for path in itertools.product(range(N), repeat=T1):
        w = model.p0[path[0]]
        h = 1
        lik = norm.pdf(y[0], obs.c[path[0]], obs.d[path[0]])
        prefix = [w * lik]
        for k in range(1, T1):
            i, j = path[k - 1], path[k]
            law = model.sojourns[i]
            # P(S = h | S >= h) straight from the pmf
            surv = sum(law.pmf[h - 1:])
            haz = 1.0 if h >= law.support or surv == 0 else law.pmf[h - 1] / surv
            if j == i:
                w *= 1.0 - haz
                h += 1
            else:
                w *= model.kernel.p[j, i] * haz
                h = 1
            lik *= norm.pdf(y[k], obs.c[j], obs.d[j])
            prefix.append(w * lik)
        for k in range(T1):
            filt[k, path[k]] += prefix[k]
            smooth[k, path[k]] += prefix[-1]
    return filt / filt.sum(1, keepdims=True), smooth / smooth.sum(1, keepdims=True)


# pass/fail lines from the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []
