import setuptools
import avezlab

with open("README.md", 'r') as f:
    long_description = f.read()

setuptools.setup(
    name="avezlab",
    version=avezlab.__version__,
    author=avezlab.__author__,
    author_email="avezlab@users.noreply.github.com",
    description="Entropy, Lyapunov exponents and spectral radii of random walks on groups.",
    long_description=long_description,
    packages=["avezlab"],
    python_requires='>=3.10',
    install_requires=["numpy", "tqdm"],
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["avezlab=avezlab.main:main"]},
)
