class Model:
    """Three-tap multiply-accumulate with a registered output.

    The kernel arrives flattened into one 24-bit word; reshape splits it
    into byte-wide taps.
    """

    def __init__(self):
        self.x0 = 0
        self.x1 = 0
        self.y_reg = 0

    def reset(self):
        self.x0 = 0
        self.x1 = 0
        self.y_reg = 0

    def step(self, x, k_flat):
        k = self.reshape(k_flat)
        self.y_reg = k[0] * x + k[1] * self.x0 + k[2] * self.x1
        self.x1 = self.x0
        self.x0 = x
        return {"y": self.y_reg}

    def reshape(self, k_flat):
        return [(k_flat >> (8 * i)) & 0xFF for i in range(3)]
