from setuptools import setup, find_packages

setup(
    name='cuspma',
    version='1.0',
    packages=find_packages(exclude=['test', 'examples', 'examples.*']),
    install_requires=[
        'numpy',
        'scipy',
    ],
    extras_require={
        'test': ['pytest'],
    },
    entry_points={
        'console_scripts': ['cuspma=cuspma.cli:main'],
    },
    description='Numerical lab for cusp Kahler metrics and the perturbed complex Monge-Ampere equation.',
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    classifiers=[
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
    ],
    python_requires='>=3.8',
)
