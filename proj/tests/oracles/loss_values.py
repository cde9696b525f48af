"""Loss reference values at W=5, eps=4 evaluated with 50-digit arithmetic."""
from mpmath import mp, mpf, exp

mp.dps = 50
W, EPS = mpf(5), mpf(4)
C = W - W * (exp(W / EPS) - 1)


def loss(x):
    a = abs(mpf(x))
    return W * (exp(a / EPS) - 1) if a < W else a - C


if __name__ == "__main__":
    for x in (0, 5, 10):
        print(f"L({x}) = {mp.nstr(loss(x), 20)}")
    print(f"C = {mp.nstr(C, 20)}")
    left = W * (exp(W / EPS) - 1)
    print(f"jump at W = {mp.nstr(abs(loss(5) - left), 5)}")
