from pathlib import Path
from setuptools import setup, find_packages

description = 'Verified location and classification of stationary points'

long_description = Path('README.md').read_text('utf-8')
requirements = [l.strip()
    for l in Path('requirements.txt').read_text('utf-8').splitlines()]

setup(
    name='extrema',
    version='0.1.0',
    description=description,
    license='MIT',
    long_description=long_description,
    long_description_content_type='text/markdown',
    packages=find_packages(exclude=['tests']),
    install_requires=requirements,
    extras_require={
        'test': ['pytest', 'mpmath'],
        'docs': ['mkdocs', 'mkdocs-material', 'mkdocstrings'],
    },
    entry_points={
        'console_scripts': ['classify = extrema.cli:main'],
    },
    python_requires='>=3.8'
)
