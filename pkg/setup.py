import os
import shutil
import subprocess
from pathlib import Path
from setuptools import Command, find_packages, setup

ROOT_DIR = Path(__file__).parent.resolve()
VERSION_FILE = ROOT_DIR / 'sparsecard' / 'version.py'
BASE_VERSION = '0.1.0a0'


def _git_sha():
    try:
        out = subprocess.run(['git', 'rev-parse', 'HEAD'], cwd=str(ROOT_DIR), capture_output=True, text=True)
    except OSError:
        return None
    return out.stdout.strip() if out.returncode == 0 else None


def _resolve_version():
    sha = _git_sha()
    if os.getenv('BUILD_VERSION'):
        return os.getenv('BUILD_VERSION'), sha
    if sha:
        return f'{BASE_VERSION}+{sha[:7]}', sha
    return BASE_VERSION, sha


VERSION, SHA = _resolve_version()
VERSION_FILE.write_text(f"__version__ = {VERSION!r}\ngit_version = {SHA!r}\n")
print('-- Building sparsecard ' + VERSION)

# PYTORCH_VERSION pins torch for builds against a specific release.
torch_dep = 'torch'
if os.getenv('PYTORCH_VERSION'):
    torch_dep += '==' + os.getenv('PYTORCH_VERSION')


class clean(Command):
    """Remove the generated version file and build outputs."""

    description = 'remove generated files'
    user_options = []

    def initialize_options(self):
        pass

    def finalize_options(self):
        pass

    def run(self):
        targets = [ROOT_DIR / 'build', ROOT_DIR / 'dist', *ROOT_DIR.glob('*.egg-info')]
        if VERSION_FILE.exists():
            print(f'removing {VERSION_FILE}')
            VERSION_FILE.unlink()
        for path in targets:
            if path.exists():
                print(f'removing {path}')
                shutil.rmtree(str(path), ignore_errors=True)


setup(
    name='sparsecard',
    version=VERSION,
    description='Sparse graph reductions and min-cut solving for cardinality-based decomposable submodular minimization',
    license='BSD',
    install_requires=[
        'tabulate',
        torch_dep,
    ],
    extras_require={
        'test': ['pytest', 'hypothesis'],
    },
    python_requires='>=3.8',
    classifiers=[
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: BSD License",
        "Operating System :: MacOS :: MacOS X",
        "Operating System :: POSIX :: Linux",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: Implementation :: CPython",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    packages=find_packages(exclude=["test*"]),
    entry_points={
        'console_scripts': ['sparsecard=sparsecard.cli:main'],
    },
    zip_safe=False,
    cmdclass={
        'clean': clean,
    },
)
