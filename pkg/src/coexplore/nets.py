"""Dense / conv building blocks with handwritten reverse-mode gradients.

Everything is float64 numpy. Each layer exposes a forward returning
(output, cache) and a backward taking (upstream gradient, cache); the
composite networks below thread caches through and accumulate per-parameter
gradients into plain dicts. No autodiff framework is involved, which keeps
every gradient checkable against finite differences.
"""

from __future__ import annotations

import numpy as np

LN_EPS = 1e-5


# ---------------------------------------------------------------------------
# layer primitives


def dense_forward(x, W, b):
    return x @ W + b, (x, W)


def dense_backward(dy, cache):
    x, W = cache
    dx = dy @ W.T
    dW = x.T @ dy
    db = dy.sum(axis=0)
    return dx, dW, db


def relu_forward(x):
    y = np.maximum(x, 0.0)
    return y, (x,)


def relu_backward(dy, cache):
    (x,) = cache
    return dy * (x > 0.0)


def layernorm_forward(x, gamma, beta, eps=LN_EPS):
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    y = xhat * gamma + beta
    return y, (xhat, inv, gamma)


def layernorm_backward(dy, cache):
    xhat, inv, gamma = cache
    d = xhat.shape[1]
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dxhat = dy * gamma
    dx = (
        inv
        / d
        * (d * dxhat - dxhat.sum(axis=1, keepdims=True) - xhat * (dxhat * xhat).sum(axis=1, keepdims=True))
    )
    return dx, dgamma, dbeta


def conv3x3_forward(x, W, b):
    """3x3 convolution, stride 1, zero padding 1 (spatial size preserved).

    x: (B, C_in, H, Wd); W: (C_out, C_in, 3, 3); b: (C_out,)
    """
    B, C_in, H, Wd = x.shape
    C_out = W.shape[0]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    y = np.broadcast_to(b.reshape(1, C_out, 1, 1), (B, C_out, H, Wd)).copy()
    for di in range(3):
        for dj in range(3):
            patch = xp[:, :, di : di + H, dj : dj + Wd]
            y += np.einsum("oc,bchw->bohw", W[:, :, di, dj], patch, optimize=True)
    return y, (xp, W, x.shape)


def conv3x3_backward(dy, cache):
    xp, W, x_shape = cache
    B, C_in, H, Wd = x_shape
    dW = np.zeros_like(W)
    dxp = np.zeros_like(xp)
    db = dy.sum(axis=(0, 2, 3))
    for di in range(3):
        for dj in range(3):
            patch = xp[:, :, di : di + H, dj : dj + Wd]
            dW[:, :, di, dj] = np.einsum("bohw,bchw->oc", dy, patch, optimize=True)
            dxp[:, :, di : di + H, dj : dj + Wd] += np.einsum(
                "oc,bohw->bchw", W[:, :, di, dj], dy, optimize=True
            )
    dx = dxp[:, :, 1:-1, 1:-1]
    return dx, dW, db


def masked_log_softmax(logits, mask):
    """Row-wise log-probabilities with unavailable entries at -inf.

    mask is a {0,1} array of the same shape; every row needs at least one
    available entry.
    """
    avail = mask.astype(bool)
    if not avail.any(axis=1).all():
        raise ValueError("a row has no available action")
    masked = np.where(avail, logits, -np.inf)
    zmax = masked.max(axis=1, keepdims=True)
    z = masked - zmax
    expz = np.where(avail, np.exp(z), 0.0)
    logZ = np.log(expz.sum(axis=1, keepdims=True))
    return np.where(avail, z - logZ, -np.inf)


def categorical_logp_forward(logits, mask, actions):
    """Log-probability of chosen actions under the masked categorical."""
    logp_all = masked_log_softmax(logits, mask)
    rows = np.arange(logits.shape[0])
    probs = np.exp(logp_all)  # exp(-inf) = 0 on the masked entries
    return logp_all[rows, actions], (probs, actions)


def categorical_logp_backward(dlogp, cache):
    probs, actions = cache
    rows = np.arange(probs.shape[0])
    dlogits = -probs * dlogp[:, None]
    dlogits[rows, actions] += dlogp
    return dlogits


# ---------------------------------------------------------------------------
# initializers


def orthogonal(rng, rows, cols, gain=1.0):
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(gain * q[:rows, :cols])


def head_init(rng, rows, cols, scale=1e-2):
    return rng.uniform(-scale, scale, size=(rows, cols))


# ---------------------------------------------------------------------------
# composite networks


class MlpNet:
    """dense -> relu -> layernorm -> dense -> relu -> dense.

    The default widths follow the reference policy; the output head is 10
    logits for actors and a single value for the critic.
    """

    def __init__(self, in_dim: int, hidden: tuple[int, int], out_dim: int, rng):
        h1, h2 = hidden
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.params = {
            "W1": orthogonal(rng, in_dim, h1, gain=np.sqrt(2.0)),
            "b1": np.zeros(h1),
            "ln_g": np.ones(h1),
            "ln_b": np.zeros(h1),
            "W2": orthogonal(rng, h1, h2, gain=np.sqrt(2.0)),
            "b2": np.zeros(h2),
            "W3": head_init(rng, h2, out_dim),
            "b3": np.zeros(out_dim),
        }

    def forward(self, x, need_cache: bool = False):
        p = self.params
        a1, c1 = dense_forward(x, p["W1"], p["b1"])
        r1, cr1 = relu_forward(a1)
        n1, cn1 = layernorm_forward(r1, p["ln_g"], p["ln_b"])
        a2, c2 = dense_forward(n1, p["W2"], p["b2"])
        r2, cr2 = relu_forward(a2)
        out, c3 = dense_forward(r2, p["W3"], p["b3"])
        if not need_cache:
            return out
        return out, (c1, cr1, cn1, c2, cr2, c3)

    def backward(self, dout, cache):
        c1, cr1, cn1, c2, cr2, c3 = cache
        grads = {}
        dr2, grads["W3"], grads["b3"] = dense_backward(dout, c3)
        da2 = relu_backward(dr2, cr2)
        dn1, grads["W2"], grads["b2"] = dense_backward(da2, c2)
        dr1, grads["ln_g"], grads["ln_b"] = layernorm_backward(dn1, cn1)
        da1 = relu_backward(dr1, cr1)
        _, grads["W1"], grads["b1"] = dense_backward(da1, c1)
        return grads


class CnnNet:
    """Conv trunk over the 3x3 view plus dense embeddings of the rest.

    Layout: the input row is split (fov 9, fpr 24, net n). The view passes
    two padded 3x3 convolutions (1->8->16 channels), is flattened and
    embedded to 64; fpr and net embed to 32 and 16; the concatenation runs
    through a 128-wide trunk into the output head.
    """

    FOV_EMBED = 64
    FPR_EMBED = 32
    NET_EMBED = 16
    TRUNK = 128

    def __init__(self, in_dim: int, out_dim: int, rng, fov_len: int = 9, fpr_len: int = 24):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.fov_len = fov_len
        self.fpr_len = fpr_len
        self.net_len = in_dim - fov_len - fpr_len
        if self.net_len < 1:
            raise ValueError(f"input dim {in_dim} too small for the fov/fpr split")
        flat = 16 * fov_len
        cat = self.FOV_EMBED + self.FPR_EMBED + self.NET_EMBED
        g = np.sqrt(2.0)
        self.params = {
            "c1W": orthogonal(rng, 8, 9, gain=g).reshape(8, 1, 3, 3),
            "c1b": np.zeros(8),
            "c2W": orthogonal(rng, 16, 72, gain=g).reshape(16, 8, 3, 3),
            "c2b": np.zeros(16),
            "fovW": orthogonal(rng, flat, self.FOV_EMBED, gain=g),
            "fovb": np.zeros(self.FOV_EMBED),
            "fprW": orthogonal(rng, fpr_len, self.FPR_EMBED, gain=g),
            "fprb": np.zeros(self.FPR_EMBED),
            "netW": orthogonal(rng, self.net_len, self.NET_EMBED, gain=g),
            "netb": np.zeros(self.NET_EMBED),
            "tW": orthogonal(rng, cat, self.TRUNK, gain=g),
            "tb": np.zeros(self.TRUNK),
            "W3": head_init(rng, self.TRUNK, out_dim),
            "b3": np.zeros(out_dim),
        }

    def forward(self, x, need_cache: bool = False):
        p = self.params
        B = x.shape[0]
        side = int(np.sqrt(self.fov_len))
        fov = x[:, : self.fov_len].reshape(B, 1, side, side)
        fpr = x[:, self.fov_len : self.fov_len + self.fpr_len]
        net = x[:, self.fov_len + self.fpr_len :]

        z1, cc1 = conv3x3_forward(fov, p["c1W"], p["c1b"])
        r1, cv1 = relu_forward(z1)
        z2, cc2 = conv3x3_forward(r1, p["c2W"], p["c2b"])
        r2, cv2 = relu_forward(z2)
        flat = r2.reshape(B, -1)
        fe, cfe = dense_forward(flat, p["fovW"], p["fovb"])
        fer, cfer = relu_forward(fe)
        pe, cpe = dense_forward(fpr, p["fprW"], p["fprb"])
        per, cper = relu_forward(pe)
        ne, cne = dense_forward(net, p["netW"], p["netb"])
        ner, cner = relu_forward(ne)
        cat = np.concatenate([fer, per, ner], axis=1)
        t, ct = dense_forward(cat, p["tW"], p["tb"])
        tr, ctr = relu_forward(t)
        out, c3 = dense_forward(tr, p["W3"], p["b3"])
        if not need_cache:
            return out
        cache = (cc1, cv1, cc2, cv2, cfe, cfer, cpe, cper, cne, cner, ct, ctr, c3, r2.shape)
        return out, cache

    def backward(self, dout, cache):
        (cc1, cv1, cc2, cv2, cfe, cfer, cpe, cper, cne, cner, ct, ctr, c3, r2_shape) = cache
        grads = {}
        dtr, grads["W3"], grads["b3"] = dense_backward(dout, c3)
        dt = relu_backward(dtr, ctr)
        dcat, grads["tW"], grads["tb"] = dense_backward(dt, ct)
        dfer = dcat[:, : self.FOV_EMBED]
        dper = dcat[:, self.FOV_EMBED : self.FOV_EMBED + self.FPR_EMBED]
        dner = dcat[:, self.FOV_EMBED + self.FPR_EMBED :]
        dne = relu_backward(dner, cner)
        _, grads["netW"], grads["netb"] = dense_backward(dne, cne)
        dpe = relu_backward(dper, cper)
        _, grads["fprW"], grads["fprb"] = dense_backward(dpe, cpe)
        dfe = relu_backward(dfer, cfer)
        dflat, grads["fovW"], grads["fovb"] = dense_backward(dfe, cfe)
        dr2 = relu_backward(dflat.reshape(r2_shape), cv2)
        dz1, grads["c2W"], grads["c2b"] = conv3x3_backward(dr2, cc2)
        dfov = relu_backward(dz1, cv1)
        _, grads["c1W"], grads["c1b"] = conv3x3_backward(dfov, cc1)
        return grads


class BranchedCritic:
    """Shared per-agent branch, concatenated, then a dense head to a scalar.

    Used by the conv critic variant: every agent's observation runs through
    the same CnnNet-style branch (shared weights); the gradients from all
    branches accumulate.
    """

    def __init__(self, obs_dim: int, n_agents: int, rng):
        self.obs_dim = obs_dim
        self.n_agents = n_agents
        self.branch = CnnNet(obs_dim, CnnNet.TRUNK, rng)
        # the branch's own head becomes the embedding layer here
        cat = CnnNet.TRUNK * n_agents
        self.params = {
            "hW": orthogonal(rng, cat, 128, gain=np.sqrt(2.0)),
            "hb": np.zeros(128),
            "vW": head_init(rng, 128, 1),
            "vb": np.zeros(1),
        }

    def all_params(self):
        out = {f"branch.{k}": v for k, v in self.branch.params.items()}
        out.update({f"head.{k}": v for k, v in self.params.items()})
        return out

    def forward(self, joint_obs, need_cache: bool = False):
        B = joint_obs.shape[0]
        per = joint_obs.reshape(B * self.n_agents, self.obs_dim)
        if need_cache:
            emb, bcache = self.branch.forward(per, need_cache=True)
        else:
            emb = self.branch.forward(per)
            bcache = None
        cat = emb.reshape(B, -1)
        h, ch = dense_forward(cat, self.params["hW"], self.params["hb"])
        hr, chr_ = relu_forward(h)
        v, cv = dense_forward(hr, self.params["vW"], self.params["vb"])
        if not need_cache:
            return v[:, 0]
        return v[:, 0], (bcache, ch, chr_, cv, B)

    def backward(self, dv, cache):
        bcache, ch, chr_, cv, B = cache
        grads = {}
        dhr, gvW, gvb = dense_backward(dv[:, None], cv)
        dh = relu_backward(dhr, chr_)
        dcat, ghW, ghb = dense_backward(dh, ch)
        demb = dcat.reshape(B * self.n_agents, -1)
        bgrads = self.branch.backward(demb, bcache)
        for k, v in bgrads.items():
            grads[f"branch.{k}"] = v
        grads.update({"head.hW": ghW, "head.hb": ghb, "head.vW": gvW, "head.vb": gvb})
        return grads

    def apply_grads(self, grads, scale):
        for k, g in grads.items():
            kind, name = k.split(".", 1)
            target = self.branch.params if kind == "branch" else self.params
            target[name] += scale * g


def sgd_ascent(params: dict, grads: dict, lr: float) -> None:
    for k, g in grads.items():
        params[k] += lr * g


def sgd_descent(params: dict, grads: dict, lr: float) -> None:
    for k, g in grads.items():
        params[k] -= lr * g
