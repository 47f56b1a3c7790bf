Here is the completed reference model.

```python
class Model:
    """Counts enabled step events modulo 256."""

    def __init__(self):
        self.count_reg = 0  # 8-bit

    def reset(self):
        self.count_reg = 0

    def step(self, en):
        if en:
            self.count_reg = self.compute(self.count_reg)
        return {"count": self.count_reg}

    def compute(self, value):
        return (value + 1) % 256

    def reshape(self, *args):
        pass
```
